#pragma once

// Category annotations over a loaded family set: validation, the
// append-only store, and the request handlers behind the HTTP routes.

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "varfam/error.hpp"
#include "varfam/output.hpp"

namespace varfam::annotation {

using json = nlohmann::ordered_json;

enum class Category { kOrthographic, kMorphological, kLexical, kCollocation, kTokenisation, kRegional, kOther };

inline constexpr std::array<std::string_view, 7> kCategoryNames = {
    "Orthographic", "Morphological", "Lexical", "Collocation", "Tokenisation", "Regional", "Other"};

inline std::string_view to_string(Category c) { return kCategoryNames[static_cast<std::size_t>(c)]; }

/// Exact, case-sensitive match.
inline std::optional<Category> parse_category(std::string_view s) {
  for (std::size_t i = 0; i < kCategoryNames.size(); ++i) {
    if (kCategoryNames[i] == s) return static_cast<Category>(i);
  }
  return std::nullopt;
}

/// Error carrying an HTTP status.
class ApiError : public std::runtime_error {
 public:
  ApiError(int status, const std::string& what) : std::runtime_error(what), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct FamilyAnnotation {
  std::string family_id;
  std::vector<Category> categories;
  std::string note;
  std::string annotator;
  std::string timestamp;  // ISO 8601 UTC

  bool operator==(const FamilyAnnotation&) const = default;
};

inline std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline json to_json(const FamilyAnnotation& a) {
  json cats = json::array();
  for (auto c : a.categories) cats.push_back(std::string(to_string(c)));
  return {{"family_id", a.family_id},
          {"categories", cats},
          {"note", a.note},
          {"annotator", a.annotator},
          {"timestamp", a.timestamp}};
}

/// Parses and validates an annotation body. `family_id` overrides any id in
/// the body (the route decides which family is meant).
inline FamilyAnnotation annotation_from_json(const nlohmann::json& j, std::optional<std::string> family_id = {}) {
  if (!j.is_object()) throw ApiError(400, "annotation must be a JSON object");
  FamilyAnnotation a;
  if (family_id) {
    a.family_id = *family_id;
  } else if (auto it = j.find("family_id"); it != j.end() && it->is_string()) {
    a.family_id = it->get<std::string>();
  } else {
    throw ApiError(400, "family_id is required");
  }
  auto cats = j.find("categories");
  if (cats == j.end() || !cats->is_array()) throw ApiError(400, "categories must be an array");
  if (cats->empty()) throw ApiError(400, "categories must not be empty");
  if (cats->size() > 3) throw ApiError(400, "at most 3 categories allowed, got " + std::to_string(cats->size()));
  for (const auto& c : *cats) {
    if (!c.is_string()) throw ApiError(400, "categories must be strings");
    auto parsed = parse_category(c.get<std::string>());
    if (!parsed) throw ApiError(400, "unknown category: " + c.get<std::string>());
    if (std::find(a.categories.begin(), a.categories.end(), *parsed) != a.categories.end()) {
      throw ApiError(400, "duplicate category: " + c.get<std::string>());
    }
    a.categories.push_back(*parsed);
  }
  auto text = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return {};
    if (!it->is_string()) throw ApiError(400, std::string(key) + " must be a string");
    return it->get<std::string>();
  };
  a.note = text("note");
  a.annotator = text("annotator");
  a.timestamp = text("timestamp");
  return a;
}

/// Append-only JSONL log of annotations; the latest entry per family wins.
/// Writes are serialized and acknowledged after fsync.
class AnnotationStore {
 public:
  explicit AnnotationStore(std::filesystem::path path) : path_(std::move(path)) {
    if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
    load();
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    if (fd_ < 0) throw DataError("cannot open annotation log: " + path_.string());
    if (needs_newline_) append("\n");
  }
  AnnotationStore(const AnnotationStore&) = delete;
  AnnotationStore& operator=(const AnnotationStore&) = delete;
  ~AnnotationStore() {
    if (fd_ >= 0) ::close(fd_);
  }

  FamilyAnnotation put(FamilyAnnotation a) {
    if (a.timestamp.empty()) a.timestamp = utc_now();
    const std::string line = to_json(a).dump() + '\n';
    std::unique_lock lock(mutex_);
    append(line);
    latest_[a.family_id] = a;
    return a;
  }

  std::optional<FamilyAnnotation> get(const std::string& family_id) const {
    std::shared_lock lock(mutex_);
    auto it = latest_.find(family_id);
    if (it == latest_.end()) return std::nullopt;
    return it->second;
  }

  /// Current state ordered by family_id.
  std::vector<FamilyAnnotation> all() const {
    std::shared_lock lock(mutex_);
    std::vector<FamilyAnnotation> out;
    out.reserve(latest_.size());
    for (const auto& [id, a] : latest_) out.push_back(a);
    return out;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return latest_.size();
  }

  void flush() {
    std::unique_lock lock(mutex_);
    if (fd_ >= 0) ::fsync(fd_);
  }

  const std::filesystem::path& path() const { return path_; }

 private:
  void load() {
    std::ifstream in(path_, std::ios::binary);
    if (!in) return;
    std::string line;
    std::size_t line_no = 0;
    std::uintmax_t offset = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto line_start = offset;
      offset += line.size() + 1;
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) {
        // a torn final line from a crash is cut off; anything else is corruption
        if (in.peek() == std::char_traits<char>::eof()) {
          in.close();
          std::filesystem::resize_file(path_, line_start);
          break;
        }
        throw DataError("annotation log line " + std::to_string(line_no) + ": invalid JSON");
      }
      try {
        auto a = annotation_from_json(j);
        latest_[a.family_id] = std::move(a);
      } catch (const ApiError& e) {
        throw DataError("annotation log line " + std::to_string(line_no) + ": " + e.what());
      }
    }
    in.close();
    const auto size = std::filesystem::file_size(path_);
    if (size > 0) {
      std::ifstream tail(path_, std::ios::binary);
      tail.seekg(static_cast<std::streamoff>(size - 1));
      needs_newline_ = tail.get() != '\n';
    }
  }

  void append(const std::string& line) {
    std::size_t done = 0;
    while (done < line.size()) {
      const auto n = ::write(fd_, line.data() + done, line.size() - done);
      if (n < 0) throw DataError("write to annotation log failed");
      done += static_cast<std::size_t>(n);
    }
    if (::fsync(fd_) != 0) throw DataError("fsync of annotation log failed");
  }

  std::filesystem::path path_;
  int fd_ = -1;
  bool needs_newline_ = false;
  mutable std::shared_mutex mutex_;
  std::map<std::string, FamilyAnnotation> latest_;
};

struct ListQuery {
  std::size_t page = 1;
  std::size_t page_size = 50;
  std::string sort = "cohesion";
  bool descending = true;
  std::string filter = "all";  // all | annotated | unannotated
  std::optional<Category> category;
};

/// Builds a query from URL parameters; bad values raise 400.
inline ListQuery parse_list_query(const std::multimap<std::string, std::string>& params) {
  ListQuery q;
  bool order_given = false;
  auto number = [](const std::string& key, const std::string& value) {
    std::size_t pos = 0;
    unsigned long long n = 0;
    try {
      n = std::stoull(value, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != value.size() || value.empty() || value[0] == '-' || n == 0) {
      throw ApiError(400, key + " must be a positive integer");
    }
    return static_cast<std::size_t>(n);
  };
  for (const auto& [key, value] : params) {
    if (key == "page") {
      q.page = number(key, value);
    } else if (key == "page_size") {
      q.page_size = std::min<std::size_t>(number(key, value), 1000);
    } else if (key == "sort") {
      if (value != "cohesion" && value != "size" && value != "mean_cosine" && value != "family_id") {
        throw ApiError(400, "bad sort key: " + value);
      }
      q.sort = value;
    } else if (key == "order") {
      if (value != "asc" && value != "desc") throw ApiError(400, "order must be asc or desc");
      q.descending = value == "desc";
      order_given = true;
    } else if (key == "filter") {
      if (value != "all" && value != "annotated" && value != "unannotated") {
        throw ApiError(400, "filter must be all, annotated or unannotated");
      }
      q.filter = value;
    } else if (key == "category") {
      q.category = parse_category(value);
      if (!q.category) throw ApiError(400, "unknown category: " + value);
    } else {
      throw ApiError(400, "unknown query parameter: " + key);
    }
  }
  if (!order_given) q.descending = q.sort != "family_id";
  return q;
}

inline const std::string& export_csv_header() {
  static const std::string h = "family_id,categories,note,annotator,timestamp";
  return h;
}

/// The request handlers, independent of the HTTP layer. The family set is
/// immutable for the lifetime of the service.
class AnnotationService {
 public:
  AnnotationService(std::vector<LoadedFamily> families, AnnotationStore& store) : store_(store) {
    for (auto& f : families) {
      const std::string id = f.family.family.family_id;
      if (index_.contains(id)) {
        // open-mode stars can share a member set; keep the first
        continue;
      }
      index_.emplace(id, families_.size());
      families_.push_back(std::move(f));
    }
  }

  std::size_t size() const { return families_.size(); }

  json health() const { return {{"status", "ok"}, {"families", families_.size()}, {"annotated", annotated_count()}}; }

  json list(const ListQuery& q) const {
    std::vector<const LoadedFamily*> rows;
    for (const auto& f : families_) {
      const auto a = store_.get(f.family.family.family_id);
      if (q.filter == "annotated" && !a) continue;
      if (q.filter == "unannotated" && a) continue;
      if (q.category) {
        if (!a || std::find(a->categories.begin(), a->categories.end(), *q.category) == a->categories.end()) continue;
      }
      rows.push_back(&f);
    }
    auto key = [&](const LoadedFamily* f) -> double {
      const auto& s = f->family.score;
      if (q.sort == "size") return static_cast<double>(s.size);
      if (q.sort == "mean_cosine") return s.mean_cosine;
      return s.cohesion;
    };
    std::sort(rows.begin(), rows.end(), [&](const LoadedFamily* a, const LoadedFamily* b) {
      const auto& ia = a->family.family.family_id;
      const auto& ib = b->family.family.family_id;
      if (q.sort != "family_id") {
        const double ka = key(a);
        const double kb = key(b);
        if (ka != kb) return q.descending ? ka > kb : ka < kb;
        return ia < ib;
      }
      return q.descending ? ia > ib : ia < ib;
    });
    json items = json::array();
    const std::size_t begin = (q.page - 1) * q.page_size;
    for (std::size_t i = begin; i < rows.size() && i < begin + q.page_size; ++i) items.push_back(summary(*rows[i]));
    return {{"page", q.page},
            {"page_size", q.page_size},
            {"total", rows.size()},
            {"items", items},
            {"progress", {{"annotated", annotated_count()}, {"total", families_.size()}}}};
  }

  json get(const std::string& family_id) const {
    const LoadedFamily& f = find(family_id);
    json j = json::parse(family_to_jsonl(f.family, f.config_echo));
    if (f.family.has_dimension_stats) {
      json stats = json::array();
      for (const auto& m : f.family.members) {
        if (!m.dimensions) continue;
        stats.push_back({{"variant", m.token},
                         {"coverage", m.dimensions->coverage},
                         {"top_dimension", m.dimensions->top_dimension ? json(*m.dimensions->top_dimension) : json(nullptr)},
                         {"top_share", m.dimensions->top_share},
                         {"total_frequency", m.frequency}});
      }
      j["dimension_stats"] = stats;
    } else {
      j["dimension_stats"] = nullptr;
    }
    const auto a = store_.get(family_id);
    j["annotation"] = a ? to_json(*a) : json(nullptr);
    return j;
  }

  json put(const std::string& family_id, const nlohmann::json& body) {
    find(family_id);
    FamilyAnnotation a = annotation_from_json(body, family_id);
    return to_json(store_.put(std::move(a)));
  }

  /// Multi-label counts: each family adds one to each of its categories.
  json category_summary() const {
    std::array<std::size_t, kCategoryNames.size()> counts{};
    for (const auto& a : store_.all()) {
      for (auto c : a.categories) ++counts[static_cast<std::size_t>(c)];
    }
    json j = json::object();
    for (std::size_t i = 0; i < counts.size(); ++i) j[std::string(kCategoryNames[i])] = counts[i];
    return j;
  }

  std::string export_csv() const {
    std::string out = export_csv_header() + '\n';
    for (const auto& a : store_.all()) {
      std::string cats;
      for (std::size_t i = 0; i < a.categories.size(); ++i) {
        if (i) cats += '|';
        cats += to_string(a.categories[i]);
      }
      out += csv_field(a.family_id) + ',' + csv_field(cats) + ',' + csv_field(a.note) + ',' + csv_field(a.annotator) +
             ',' + csv_field(a.timestamp) + '\n';
    }
    return out;
  }

  std::string export_jsonl() const {
    std::string out;
    for (const auto& a : store_.all()) out += to_json(a).dump() + '\n';
    return out;
  }

  /// Re-applies an exported JSONL stream; returns the number of entries.
  std::size_t import_jsonl(std::istream& in) {
    std::string line;
    std::size_t n = 0;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      auto j = nlohmann::json::parse(line, nullptr, false);
      if (j.is_discarded()) throw ApiError(400, "import line " + std::to_string(line_no) + ": invalid JSON");
      FamilyAnnotation a = annotation_from_json(j);
      find(a.family_id);
      store_.put(std::move(a));
      ++n;
    }
    return n;
  }

 private:
  const LoadedFamily& find(const std::string& family_id) const {
    auto it = index_.find(family_id);
    if (it == index_.end()) throw ApiError(404, "unknown family: " + family_id);
    return families_[it->second];
  }

  std::size_t annotated_count() const {
    std::size_t n = 0;
    for (const auto& a : store_.all()) n += index_.contains(a.family_id) ? 1 : 0;
    return n;
  }

  json summary(const LoadedFamily& f) const {
    const auto& s = f.family.score;
    json members = json::array();
    for (const auto& m : f.family.family.members) members.push_back(m);
    const auto a = store_.get(f.family.family.family_id);
    return {{"family_id", f.family.family.family_id},
            {"mode", std::string(varfam::to_string(f.family.family.mode))},
            {"seed", f.family.family.seed ? json(*f.family.family.seed) : json(nullptr)},
            {"members", members},
            {"size", s.size},
            {"mean_cosine", s.mean_cosine},
            {"mean_jaccard", s.mean_jaccard},
            {"cohesion", s.cohesion},
            {"annotated", a.has_value()},
            {"categories", a ? to_json(*a)["categories"] : json::array()}};
  }

  std::vector<LoadedFamily> families_;
  std::unordered_map<std::string, std::size_t> index_;
  AnnotationStore& store_;
};

}  // namespace varfam::annotation
