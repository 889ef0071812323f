#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <thread>

#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "varfam/annotation.hpp"
#include "varfam/server.hpp"

using namespace varfam;
using namespace varfam::annotation;

namespace {

std::vector<LoadedFamily> golden_families() {
  return read_families_jsonl(std::filesystem::path(VF_TEST_DATA) / "golden_families.jsonl");
}

std::vector<std::string> ids(const std::vector<LoadedFamily>& families) {
  std::vector<std::string> out;
  for (const auto& f : families) out.push_back(f.family.family.family_id);
  return out;
}

class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("vf_annotation_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() { std::filesystem::remove_all(path_); }
  std::filesystem::path operator/(const char* name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// A live HTTP server on an ephemeral port.
class LiveServer {
 public:
  LiveServer(std::vector<LoadedFamily> families, const std::filesystem::path& log)
      : store_(log), service_(std::move(families), store_) {
    install_routes(server_, service_);
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LiveServer() {
    server_.stop();
    thread_.join();
    store_.flush();
  }

  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_connection_timeout(5);
    c.set_read_timeout(5);
    return c;
  }

 private:
  AnnotationStore store_;
  AnnotationService service_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = 0;
};

httplib::Result put_json(httplib::Client& c, const std::string& id, const json& body) {
  return c.Put("/families/" + id + "/annotation", body.dump(), "application/json");
}

json body_of(const httplib::Result& r) { return json::parse(r->body); }

}  // namespace

// ---------------------------------------------------------------- validation

TEST(Annotation, CategoryNamesAreExact) {
  EXPECT_EQ(kCategoryNames.size(), 7u);
  for (auto name : kCategoryNames) EXPECT_EQ(to_string(*parse_category(name)), name);
  EXPECT_FALSE(parse_category("orthographic"));
  EXPECT_FALSE(parse_category("Tokenization"));
  EXPECT_FALSE(parse_category(""));
}

TEST(Annotation, BodyValidation) {
  const auto ok = annotation_from_json(json{{"categories", {"Orthographic", "Regional"}}, {"note", "n"}}, "abc");
  EXPECT_EQ(ok.family_id, "abc");
  EXPECT_EQ(ok.categories, (std::vector<Category>{Category::kOrthographic, Category::kRegional}));
  auto status = [](const json& body) {
    try {
      annotation_from_json(body, "abc");
      return 200;
    } catch (const ApiError& e) {
      return e.status();
    }
  };
  EXPECT_EQ(status(json{{"categories", json::array()}}), 400);
  EXPECT_EQ(status(json{{"categories", {"Orthographic", "Lexical", "Other", "Regional"}}}), 400);
  EXPECT_EQ(status(json{{"categories", {"orthographic"}}}), 400);
  EXPECT_EQ(status(json{{"categories", {"Other", "Other"}}}), 400);
  EXPECT_EQ(status(json{{"categories", "Other"}}), 400);
  EXPECT_EQ(status(json{{"categories", {"Other"}}, {"note", 5}}), 400);
  EXPECT_EQ(status(json::array()), 400);
  EXPECT_EQ(status(json{{"categories", {"Orthographic", "Lexical", "Other"}}}), 200);
}

TEST(Annotation, ErrorMessageNamesViolation) {
  try {
    annotation_from_json(json{{"categories", {"Orthographic", "Lexical", "Other", "Regional"}}}, "x");
    FAIL();
  } catch (const ApiError& e) {
    EXPECT_NE(std::string(e.what()).find("at most 3"), std::string::npos);
  }
  try {
    annotation_from_json(json{{"categories", {"orthographic"}}}, "x");
    FAIL();
  } catch (const ApiError& e) {
    EXPECT_NE(std::string(e.what()).find("orthographic"), std::string::npos);
  }
}

// ---------------------------------------------------------------- store

TEST(Store, LastWriteWinsAcrossReload) {
  TempDir dir;
  {
    AnnotationStore store(dir / "log.jsonl");
    store.put({"f1", {Category::kOther}, "", "ann", "2024-01-01T00:00:00Z"});
    store.put({"f2", {Category::kLexical}, "", "ann", "2024-01-01T00:00:01Z"});
    store.put({"f1", {Category::kOrthographic, Category::kRegional}, "second", "ann", "2024-01-01T00:00:02Z"});
  }
  AnnotationStore again(dir / "log.jsonl");
  EXPECT_EQ(again.size(), 2u);
  EXPECT_EQ(again.get("f1")->note, "second");
  EXPECT_EQ(again.get("f1")->categories.size(), 2u);
}

TEST(Store, TornFinalLineIgnoredCorruptionRejected) {
  TempDir dir;
  {
    AnnotationStore store(dir / "log.jsonl");
    store.put({"f1", {Category::kOther}, "", "", "t"});
  }
  {
    std::ofstream(dir / "log.jsonl", std::ios::app) << "{\"family_id\":\"f2\",\"categ";
  }
  {
    AnnotationStore store(dir / "log.jsonl");
    EXPECT_EQ(store.size(), 1u);
    store.put({"f4", {Category::kLexical}, "", "", "t"});
  }
  EXPECT_EQ(AnnotationStore(dir / "log.jsonl").size(), 2u);
  {
    std::ofstream(dir / "log.jsonl", std::ios::app) << "{not json}\n{\"family_id\":\"f3\",\"categories\":[\"Other\"]}\n";
  }
  EXPECT_THROW(AnnotationStore(dir / "log.jsonl"), DataError);
}

TEST(Store, ConcurrentPutsOnDifferentFamiliesAllLand) {
  TempDir dir;
  {
    AnnotationStore store(dir / "log.jsonl");
    std::vector<std::thread> threads;
    for (int t = 0; t < 8; ++t) {
      threads.emplace_back([&store, t] {
        for (int i = 0; i < 25; ++i) {
          store.put({"f" + std::to_string(t) + "_" + std::to_string(i), {Category::kOther}, "", "", "t"});
        }
      });
    }
    for (auto& th : threads) th.join();
    EXPECT_EQ(store.size(), 200u);
  }
  EXPECT_EQ(AnnotationStore(dir / "log.jsonl").size(), 200u);
}

// ---------------------------------------------------------------- service

TEST(Service, ListSortFilterPage) {
  TempDir dir;
  AnnotationStore store(dir / "log.jsonl");
  AnnotationService service(golden_families(), store);
  ASSERT_EQ(service.size(), 3u);

  auto page = service.list(parse_list_query({}));
  EXPECT_EQ(page["total"], 3);
  ASSERT_EQ(page["items"].size(), 3u);
  double previous = 2.0;
  for (const auto& item : page["items"]) {
    EXPECT_LE(item["cohesion"].get<double>(), previous);
    previous = item["cohesion"].get<double>();
  }
  EXPECT_EQ(page["items"][0]["members"], json({"maat", "mat", "matt"}));

  auto asc = service.list(parse_list_query({{"sort", "cohesion"}, {"order", "asc"}}));
  EXPECT_EQ(asc["items"][0]["members"], json({"moar", "muar", "muer"}));

  auto by_id = service.list(parse_list_query({{"sort", "family_id"}}));
  EXPECT_LT(by_id["items"][0]["family_id"].get<std::string>(), by_id["items"][1]["family_id"].get<std::string>());

  auto paged = service.list(parse_list_query({{"page", "2"}, {"page_size", "2"}}));
  EXPECT_EQ(paged["items"].size(), 1u);
  EXPECT_EQ(paged["total"], 3);
  auto beyond = service.list(parse_list_query({{"page", "9"}, {"page_size", "2"}}));
  EXPECT_TRUE(beyond["items"].empty());
  EXPECT_EQ(beyond["total"], 3);

  for (const auto& id : ids(golden_families())) service.put(id, json{{"categories", {"Other"}}});
  EXPECT_TRUE(service.list(parse_list_query({{"filter", "unannotated"}}))["items"].empty());
  EXPECT_EQ(service.list(parse_list_query({}))["progress"], json({{"annotated", 3}, {"total", 3}}));
}

TEST(Service, BadQueriesAre400) {
  for (const std::multimap<std::string, std::string>& q :
       std::vector<std::multimap<std::string, std::string>>{{{"sort", "members"}},
                                                            {{"order", "up"}},
                                                            {{"page", "0"}},
                                                            {{"page_size", "-1"}},
                                                            {{"filter", "some"}},
                                                            {{"category", "regional"}},
                                                            {{"colour", "red"}}}) {
    try {
      parse_list_query(q);
      ADD_FAILURE() << q.begin()->first;
    } catch (const ApiError& e) {
      EXPECT_EQ(e.status(), 400);
    }
  }
}

TEST(Service, GetCarriesEvidence) {
  TempDir dir;
  AnnotationStore store(dir / "log.jsonl");
  auto families = golden_families();
  AnnotationService service(families, store);
  const auto j = service.get(families[0].family.family.family_id);
  ASSERT_EQ(j["members"].size(), 3u);
  for (const auto& m : j["members"]) EXPECT_TRUE(m["frequency"].is_number());
  EXPECT_EQ(j["pairs"].size(), 3u);
  EXPECT_TRUE(j["annotation"].is_null());
  EXPECT_EQ(j["dimension_stats"].size(), 3u);
  try {
    service.get("nope");
    FAIL();
  } catch (const ApiError& e) {
    EXPECT_EQ(e.status(), 404);
  }
}

TEST(Service, MissingDimensionStatsAreNull) {
  RawFamily raw = fixture::raw({"fille", "fillen"}, {{"fille", "fillen", 0.9, 0.5, true}});
  CorpusStats stats = fixture::stats();
  stats.has_dimension = false;
  stats.tokens["fillen"].corpus_frequency = 200;
  std::stringstream buf;
  write_families_jsonl(buf, score_families({raw}, stats, ScoringConfig{}), "x");
  TempDir dir;
  AnnotationStore store(dir / "log.jsonl");
  AnnotationService service(read_families_jsonl(buf), store);
  const auto j = service.get(raw.family_id);
  ASSERT_TRUE(j.contains("dimension_stats"));
  EXPECT_TRUE(j["dimension_stats"].is_null());
}

TEST(Service, CategorySummaryCountsEveryLabel) {
  TempDir dir;
  AnnotationStore store(dir / "log.jsonl");
  const auto families = golden_families();
  AnnotationService service(families, store);
  const auto id = ids(families);
  service.put(id[0], json{{"categories", {"Orthographic", "Lexical"}}});
  service.put(id[1], json{{"categories", {"Orthographic"}}});
  service.put(id[2], json{{"categories", {"Other"}}});
  EXPECT_EQ(service.category_summary(), json({{"Orthographic", 2},
                                              {"Morphological", 0},
                                              {"Lexical", 1},
                                              {"Collocation", 0},
                                              {"Tokenisation", 0},
                                              {"Regional", 0},
                                              {"Other", 1}}));
}

TEST(Service, ExportImportRoundTrip) {
  TempDir dir;
  const auto families = golden_families();
  const auto id = ids(families);
  std::string exported;
  std::string csv;
  {
    AnnotationStore store(dir / "a.jsonl");
    AnnotationService service(families, store);
    EXPECT_EQ(service.export_csv(), "family_id,categories,note,annotator,timestamp\n");
    service.put(id[0], json{{"categories", {"Orthographic", "Regional"}}, {"note", "a, b"}, {"annotator", "x"}});
    service.put(id[2], json{{"categories", {"Lexical"}}});
    exported = service.export_jsonl();
    csv = service.export_csv();
  }
  EXPECT_NE(csv.find("Orthographic|Regional,\"a, b\",x,"), std::string::npos);
  AnnotationStore store(dir / "b.jsonl");
  AnnotationService service(families, store);
  std::istringstream in(exported);
  EXPECT_EQ(service.import_jsonl(in), 2u);
  EXPECT_EQ(service.export_jsonl(), exported);
  AnnotationStore original(dir / "a.jsonl");
  EXPECT_EQ(store.all(), original.all());
}

TEST(Service, ImportRejectsUnknownFamily) {
  TempDir dir;
  AnnotationStore store(dir / "log.jsonl");
  AnnotationService service(golden_families(), store);
  std::istringstream in(R"({"family_id":"ffffffffffffffff","categories":["Other"]})");
  EXPECT_THROW(service.import_jsonl(in), ApiError);
}

// ---------------------------------------------------------------- HTTP

TEST(Http, AnnotateFetchAndSurviveRestart) {
  TempDir dir;
  const auto families = golden_families();
  const auto id = ids(families);
  std::string before;
  {
    LiveServer server(families, dir / "log.jsonl");
    auto c = server.client();

    auto health = c.Get("/health");
    ASSERT_TRUE(health);
    EXPECT_EQ(health->status, 200);
    EXPECT_EQ(body_of(health)["families"], 3);

    auto list = c.Get("/families");
    ASSERT_TRUE(list);
    EXPECT_EQ(list->status, 200);
    EXPECT_EQ(body_of(list)["page"], 1);
    EXPECT_EQ(body_of(list)["items"].size(), 3u);

    auto put = put_json(c, id[1], json{{"categories", {"Orthographic", "Regional"}}, {"annotator", "t"}});
    ASSERT_TRUE(put);
    EXPECT_EQ(put->status, 200);

    auto got = c.Get("/families/" + id[1]);
    ASSERT_TRUE(got);
    EXPECT_EQ(body_of(got)["annotation"]["categories"], json({"Orthographic", "Regional"}));

    auto four = put_json(c, id[0], json{{"categories", {"Orthographic", "Regional", "Lexical", "Other"}}});
    EXPECT_EQ(four->status, 400);
    EXPECT_NE(four->body.find("at most 3"), std::string::npos);
    EXPECT_EQ(put_json(c, id[0], json{{"categories", {"orthographic"}}})->status, 400);
    EXPECT_EQ(put_json(c, "0000000000000000", json{{"categories", {"Other"}}})->status, 404);
    EXPECT_EQ(c.Put("/families/" + id[0] + "/annotation", "{oops", "application/json")->status, 400);
    EXPECT_EQ(c.Get("/families/0000000000000000")->status, 404);
    EXPECT_EQ(c.Get("/families?sort=members")->status, 400);

    put_json(c, id[0], json{{"categories", {"Orthographic", "Lexical"}}});
    put_json(c, id[2], json{{"categories", {"Other"}}});
    auto summary = c.Get("/summary/categories");
    ASSERT_TRUE(summary);
    EXPECT_EQ(body_of(summary)["Orthographic"], 2);
    EXPECT_EQ(body_of(summary)["Regional"], 1);
    EXPECT_EQ(body_of(summary)["Lexical"], 1);
    EXPECT_EQ(body_of(summary)["Other"], 1);

    EXPECT_TRUE(body_of(c.Get("/families?filter=unannotated"))["items"].empty());
    EXPECT_EQ(body_of(c.Get("/families?category=Regional"))["total"], 1);

    auto csv = c.Get("/export?format=csv");
    ASSERT_TRUE(csv);
    EXPECT_EQ(csv->body.substr(0, csv->body.find('\n')), "family_id,categories,note,annotator,timestamp");
    EXPECT_EQ(c.Get("/export?format=xml")->status, 400);
    before = c.Get("/export?format=jsonl")->body;
  }
  LiveServer restarted(families, dir / "log.jsonl");
  auto c = restarted.client();
  EXPECT_EQ(c.Get("/export?format=jsonl")->body, before);
  EXPECT_EQ(body_of(c.Get("/families/" + id[1]))["annotation"]["categories"], json({"Orthographic", "Regional"}));
}

TEST(Http, ImportEndpoint) {
  TempDir dir;
  const auto families = golden_families();
  const auto id = ids(families);
  LiveServer server(families, dir / "log.jsonl");
  auto c = server.client();
  const std::string line = json{{"family_id", id[0]}, {"categories", {"Collocation"}}, {"note", ""},
                                {"annotator", "a"}, {"timestamp", "2024-05-01T10:00:00Z"}}
                               .dump() +
                           "\n";
  auto r = c.Post("/import", line, "application/x-ndjson");
  ASSERT_TRUE(r);
  EXPECT_EQ(r->status, 200);
  EXPECT_EQ(body_of(r)["imported"], 1);
  EXPECT_EQ(c.Get("/export?format=jsonl")->body, line);
}

TEST(Http, ParseBind) {
  EXPECT_EQ(parse_bind("0.0.0.0:9000"), (std::pair<std::string, int>{"0.0.0.0", 9000}));
  EXPECT_EQ(parse_bind("localhost"), (std::pair<std::string, int>{"localhost", 8080}));
  EXPECT_EQ(parse_bind(":81"), (std::pair<std::string, int>{"127.0.0.1", 81}));
  EXPECT_THROW(parse_bind("host:abc"), ConfigError);
  EXPECT_THROW(parse_bind("host:70000"), ConfigError);
}
