#pragma once

// Backend of the pair-labeling tool: corpus listing, labeling sessions and
// the append-only pair file. HTTP wiring lives in server.hpp; everything here
// is plain request/response logic so it can be exercised without sockets.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tfq/image_io.hpp"
#include "tfq/nn/train.hpp"
#include "tfq/rng.hpp"

namespace tfq::studio {

namespace fs = std::filesystem;

struct CorpusEntry {
  std::string id;
  std::string relpath;
  int width = 0;
  int height = 0;

  friend bool operator==(const CorpusEntry&, const CorpusEntry&) = default;
};

inline nlohmann::json to_json(const CorpusEntry& e) {
  return {{"id", e.id}, {"relpath", e.relpath}, {"url", "/img/" + e.relpath}, {"width", e.width}, {"height", e.height}};
}

using Logger = std::function<void(const std::string&)>;

inline void log_to_stderr(const std::string& msg) { std::cerr << "[pair-studio] " << msg << '\n'; }

/// Immutable listing of the PNG images under a root directory, sorted by id.
/// The id is the root-relative path without its extension.
class Corpus {
 public:
  Corpus() = default;

  static Corpus scan(const fs::path& root, const Logger& log = log_to_stderr) {
    std::error_code ec;
    const fs::path canon_root = fs::canonical(root, ec);
    if (ec || !fs::is_directory(canon_root)) throw IoError(root.string() + ": corpus root unreadable");
    Corpus c;
    c.root_ = canon_root;
    auto it = fs::recursive_directory_iterator(canon_root, ec);
    if (ec) throw IoError(root.string() + ": corpus root unreadable: " + ec.message());
    for (const auto& de : it) {
      if (!de.is_regular_file()) continue;
      const fs::path p = de.path();
      const fs::path real = fs::weakly_canonical(p, ec);
      if (ec || !within(canon_root, real)) {
        log("skipping " + p.string() + ": resolves outside the corpus root");
        continue;
      }
      std::string ext = p.extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char ch) { return std::tolower(ch); });
      const auto info = ext == ".png" ? probe_png(p) : std::nullopt;
      if (!info) {
        log("skipping " + p.string() + ": not a readable PNG image");
        continue;
      }
      const std::string rel = fs::relative(p, canon_root).generic_string();
      std::string id = fs::path(rel).replace_extension().generic_string();
      if (c.by_id_.count(id)) {
        log("skipping " + p.string() + ": duplicate id '" + id + "'");
        continue;
      }
      c.by_id_.emplace(id, c.entries_.size());
      c.entries_.push_back({id, rel, info->width, info->height});
    }
    std::sort(c.entries_.begin(), c.entries_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
    c.by_id_.clear();
    for (std::size_t i = 0; i < c.entries_.size(); ++i) {
      c.by_id_.emplace(c.entries_[i].id, i);
      c.by_rel_.emplace(c.entries_[i].relpath, i);
    }
    return c;
  }

  const fs::path& root() const { return root_; }
  const std::vector<CorpusEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }

  const CorpusEntry* find_id(const std::string& id) const {
    auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : &entries_[it->second];
  }
  const CorpusEntry* find_relpath(const std::string& rel) const {
    auto it = by_rel_.find(rel);
    return it == by_rel_.end() ? nullptr : &entries_[it->second];
  }

 private:
  static bool within(const fs::path& root, const fs::path& p) {
    auto r = root.begin();
    auto q = p.begin();
    for (; r != root.end(); ++r, ++q) {
      if (q == p.end() || *r != *q) return false;
    }
    return true;
  }

  fs::path root_;
  std::vector<CorpusEntry> entries_;
  std::map<std::string, std::size_t> by_id_;
  std::map<std::string, std::size_t> by_rel_;
};

struct Annotation {
  std::string reference_id;
  std::string similar_id;
  std::string dissimilar_id;
  std::string timestamp;
};

/// Append-only JSONL pair file. Each annotation is written as one buffer
/// holding both of its lines, under a single writer lock.
class PairStore {
 public:
  explicit PairStore(fs::path path) : path_(std::move(path)) {
    if (fs::exists(path_)) {
      std::ifstream in(path_);
      std::string line;
      while (std::getline(in, line)) {
        if (line.find_first_not_of(" \t\r") != std::string::npos) ++total_;
      }
    }
    out_.open(path_, std::ios::app | std::ios::binary);
    if (!out_) throw IoError(path_.string() + ": cannot open pair file for appending");
  }

  /// Returns false if the write failed.
  bool append(const nn::LabeledPair& similar, const nn::LabeledPair& dissimilar) {
    const std::string chunk = nn::pair_to_line(similar) + "\n" + nn::pair_to_line(dissimilar) + "\n";
    std::lock_guard lock(mutex_);
    out_.write(chunk.data(), static_cast<std::streamsize>(chunk.size()));
    out_.flush();
    if (!out_) {
      out_.clear();
      return false;
    }
    total_ += 2;
    session_ += 2;
    return true;
  }

  bool flush() {
    std::lock_guard lock(mutex_);
    out_.flush();
    return static_cast<bool>(out_);
  }

  /// Pairs in the file, including those from earlier runs.
  std::size_t total() const {
    std::lock_guard lock(mutex_);
    return total_;
  }
  /// Pairs accepted by this process.
  std::size_t session() const {
    std::lock_guard lock(mutex_);
    return session_;
  }
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
  std::ofstream out_;
  mutable std::mutex mutex_;
  std::size_t total_ = 0;
  std::size_t session_ = 0;
};

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

inline Response json_response(int status, const nlohmann::json& j) { return {status, j.dump()}; }
inline Response error_response(int status, const std::string& msg) {
  return json_response(status, {{"error", msg}});
}

class PairStudio {
 public:
  PairStudio(Corpus corpus, const fs::path& pairs_file, std::uint64_t seed)
      : corpus_(std::move(corpus)), store_(pairs_file), rng_(seed) {}

  const Corpus& corpus() const { return corpus_; }
  const PairStore& store() const { return store_; }

  Response list_images() const {
    std::error_code ec;
    if (!fs::is_directory(corpus_.root(), ec)) return error_response(500, "corpus root unreadable");
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& e : corpus_.entries()) arr.push_back(to_json(e));
    return json_response(200, arr);
  }

  /// Uniform reference plus a uniform permutation of every other image.
  Response session() {
    if (corpus_.size() < 3) {
      return error_response(409, "corpus needs at least 3 images, has " + std::to_string(corpus_.size()));
    }
    std::vector<std::size_t> grid;
    std::size_t ref;
    {
      std::lock_guard lock(rng_mutex_);
      ref = static_cast<std::size_t>(rng_.uniform_int(0, static_cast<int>(corpus_.size()) - 1));
      for (std::size_t i = 0; i < corpus_.size(); ++i) {
        if (i != ref) grid.push_back(i);
      }
      shuffle(grid, rng_);
    }
    nlohmann::json g = nlohmann::json::array();
    for (std::size_t i : grid) g.push_back(to_json(corpus_.entries()[i]));
    return json_response(200, {{"reference", to_json(corpus_.entries()[ref])}, {"grid", g}});
  }

  /// One annotation becomes (reference, similar, 1) and (reference, dissimilar, 0).
  Response add_annotation(const std::string& body) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(body);
    } catch (const nlohmann::json::parse_error&) {
      return error_response(400, "malformed JSON body");
    }
    if (!j.is_object()) return error_response(400, "body must be a JSON object");
    Annotation a;
    for (auto [key, field] : {std::pair{"referenceId", &a.reference_id}, std::pair{"similarId", &a.similar_id},
                              std::pair{"dissimilarId", &a.dissimilar_id}}) {
      if (!j.contains(key) || !j[key].is_string()) return error_response(400, std::string("missing string field ") + key);
      *field = j[key].get<std::string>();
    }
    if (j.contains("timestamp")) {
      if (!j["timestamp"].is_string()) return error_response(400, "timestamp must be a string");
      a.timestamp = j["timestamp"].get<std::string>();
    }
    const CorpusEntry* ref = corpus_.find_id(a.reference_id);
    const CorpusEntry* sim = corpus_.find_id(a.similar_id);
    const CorpusEntry* dis = corpus_.find_id(a.dissimilar_id);
    if (!ref || !sim || !dis) return error_response(400, "unknown image id");
    if (ref == sim || ref == dis || sim == dis) return error_response(400, "annotation ids must be distinct");
    if (!store_.append({ref->relpath, sim->relpath, 1}, {ref->relpath, dis->relpath, 0})) {
      return error_response(500, "failed to write pair file");
    }
    return json_response(201, {{"accepted", true}, {"pairs", store_.session()}, {"totalPairs", store_.total()}});
  }

  Response submit() {
    if (!store_.flush()) return error_response(500, "failed to flush pair file");
    return json_response(200, {{"pairs", store_.session()}, {"totalPairs", store_.total()}});
  }

  /// Pairs currently persisted in the file.
  Response list_pairs() const {
    nlohmann::json arr = nlohmann::json::array();
    try {
      for (const auto& p : nn::load_pairs(store_.path())) {
        arr.push_back({{"a", p.a}, {"b", p.b}, {"label", p.label}});
      }
    } catch (const Error& e) {
      return error_response(500, e.what());
    }
    return json_response(200, arr);
  }

  /// Raw bytes of a corpus image; only listed files are served.
  Response image(const std::string& relpath) const {
    const CorpusEntry* e = corpus_.find_relpath(relpath);
    if (!e) return error_response(404, "no such image");
    std::ifstream in(corpus_.root() / e->relpath, std::ios::binary);
    if (!in) return error_response(500, "image unreadable");
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return {200, std::move(bytes), "image/png"};
  }

 private:
  Corpus corpus_;
  PairStore store_;
  std::mutex rng_mutex_;
  Rng rng_;
};

}  // namespace tfq::studio
