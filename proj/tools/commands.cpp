// Copyright 2026 The hiercascade Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <unordered_map>

#include <CLI11.hpp>
#include <json.hpp>

#include "hiercascade/cascade.hpp"
#include "hiercascade/cost_model.hpp"
#include "hiercascade/errors.hpp"
#include "hiercascade/eval.hpp"
#include "hiercascade/store.hpp"
#include "hiercascade/synth.hpp"
#include "hiercascade/train.hpp"

namespace hiercascade::cli {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using Clock = std::chrono::steady_clock;

constexpr const char* kVersion = "0.1.0";

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string() + " for writing");
  out << text;
  out.flush();
  if (!out) throw Error(ErrorCode::kIoFailure, "write failed for " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw Error(ErrorCode::kIoFailure, "cannot create directory " + dir.string());
  }
}

std::vector<std::uint32_t> to_u32(const std::vector<std::uint64_t>& values, const char* what) {
  std::vector<std::uint32_t> out;
  for (auto v : values) {
    if (v > UINT32_MAX) throw Error(ErrorCode::kInvalidArgument, std::string(what) + " too large");
    out.push_back(static_cast<std::uint32_t>(v));
  }
  return out;
}

std::vector<std::size_t> parse_ks(const std::string& text) {
  std::vector<std::size_t> ks;
  for (auto v : parse_uint_list(text)) {
    if (v == 0) throw Error(ErrorCode::kInvalidArgument, "k must be >= 1");
    ks.push_back(static_cast<std::size_t>(v));
  }
  return ks;
}

std::vector<double> parse_real_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream stream(text);
  std::string token;
  while (std::getline(stream, token, ',')) {
    std::size_t used = 0;
    double v = 0.0;
    try {
      v = std::stod(token, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != token.size() || !std::isfinite(v)) {
      throw Error(ErrorCode::kInvalidArgument, "not a number: '" + token + "'");
    }
    values.push_back(v);
  }
  if (values.empty()) throw Error(ErrorCode::kInvalidArgument, "empty list");
  return values;
}

/// One manifest per run: everything needed to reproduce the outputs.
class Manifest {
 public:
  explicit Manifest(std::string command) {
    doc_["command"] = std::move(command);
    doc_["version"] = kVersion;
    doc_["config"] = json::object();
    doc_["artifacts"] = json::array();
    doc_["timings_ms"] = json::object();
  }

  json& config() { return doc_["config"]; }
  void seed(std::uint64_t s) { doc_["seed"] = s; }
  void artifact(const fs::path& p) { doc_["artifacts"].push_back(p.string()); }
  void timing(const std::string& key, double ms) { doc_["timings_ms"][key] = ms; }

  void write(const fs::path& path) const { write_text(path, doc_.dump(2) + "\n"); }

 private:
  json doc_;
};

fs::path sidecar(const fs::path& file) { return fs::path(file.string() + ".manifest.json"); }

// ---------------------------------------------------------------- truth I/O

std::vector<std::pair<std::uint64_t, std::uint64_t>> read_truth(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::string line;
  std::vector<std::pair<std::uint64_t, std::uint64_t>> rows;
  bool header = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (header) {
      header = false;
      if (line.rfind("query_id", 0) == 0) continue;
    }
    const auto comma = line.find(',');
    if (comma == std::string::npos) {
      throw Error(ErrorCode::kScheduleMismatch, "bad truth row: " + line);
    }
    const auto q = parse_uint_list(line.substr(0, comma));
    const auto g = parse_uint_list(line.substr(comma + 1));
    rows.emplace_back(q.at(0), g.at(0));
  }
  return rows;
}

std::string format_truth(std::span<const std::uint64_t> query_ids,
                         std::span<const std::uint64_t> truth) {
  std::ostringstream out;
  out << "query_id,gallery_id\n";
  for (std::size_t i = 0; i < truth.size(); ++i) out << query_ids[i] << "," << truth[i] << "\n";
  return out.str();
}

// --------------------------------------------------------------- store utils

GalleryStore normalized(const GalleryStore& store) {
  std::vector<std::vector<float>> blocks;
  for (std::size_t l = 0; l < store.schedule().levels(); ++l) {
    const std::size_t d = store.schedule().dim(l);
    std::vector<float> block(store.level_block(l).begin(), store.level_block(l).end());
    for (std::size_t i = 0; i < store.size(); ++i) {
      double norm = 0.0;
      for (std::size_t j = 0; j < d; ++j) norm += double(block[i * d + j]) * block[i * d + j];
      norm = std::sqrt(norm);
      if (norm > 0.0) {
        for (std::size_t j = 0; j < d; ++j) {
          block[i * d + j] = static_cast<float>(block[i * d + j] / norm);
        }
      }
    }
    blocks.push_back(std::move(block));
  }
  return GalleryStore::from_blocks(store.schedule(),
                                   std::vector<std::uint64_t>(store.ids().begin(),
                                                              store.ids().end()),
                                   std::move(blocks), store.d_raw());
}

HierSchedule resolve_schedule(const GalleryStore& gallery, const std::string& pools) {
  if (pools.empty()) return gallery.schedule();
  const auto values = to_u32(parse_uint_list(pools), "pool");
  if (values.size() != gallery.schedule().levels()) {
    throw Error(ErrorCode::kScheduleMismatch,
                "--pools has " + std::to_string(values.size()) + " entries, gallery has " +
                    std::to_string(gallery.schedule().levels()) + " levels");
  }
  return gallery.schedule().with_pools(values);
}

void require_same_dims(const GalleryStore& gallery, const GalleryStore& queries) {
  if (!gallery.schedule().same_dims(queries.schedule())) {
    throw Error(ErrorCode::kScheduleMismatch, "gallery " + gallery.schedule().to_string() +
                                                  " vs queries " +
                                                  queries.schedule().to_string());
  }
}

std::vector<QueryEmbedding> select_queries(const GalleryStore& store, std::size_t begin,
                                           std::size_t max, std::vector<std::uint64_t>& ids) {
  std::vector<QueryEmbedding> out;
  const std::size_t end = max == 0 ? store.size() : std::min(store.size(), begin + max);
  for (std::size_t i = begin; i < end; ++i) {
    out.push_back(QueryEmbedding::from_store(store, i));
    ids.push_back(store.id_at(i));
  }
  return out;
}

json trace_to_json(std::uint64_t query_id, const CascadeTrace& trace, bool timings) {
  json line;
  line["query"] = query_id;
  json levels = json::array();
  for (std::size_t l = 0; l < trace.levels.size(); ++l) {
    const LevelTrace& lt = trace.levels[l];
    json level;
    level["level"] = l;
    level["pool_in"] = lt.pool_in;
    level["pool"] = lt.pool_requested;
    level["kept"] = lt.kept;
    level["clamped"] = lt.clamped;
    level["ids"] = lt.ids;
    level["scores"] = lt.scores;
    if (timings) level["time_ns"] = lt.time_ns;
    levels.push_back(std::move(level));
  }
  line["levels"] = std::move(levels);
  json final_list = json::array();
  for (const Scored& s : trace.final) final_list.push_back({s.id, s.score});
  line["final"] = std::move(final_list);
  line["reranked"] = trace.reranked;
  if (timings) line["rerank_ns"] = trace.rerank_ns;
  return line;
}

// ------------------------------------------------------------------- synth

struct SynthOpts {
  std::size_t pairs = 1000;
  std::size_t d_raw = 64;
  std::size_t latent = 16;
  double noise = 0.1;
  std::uint64_t seed = 7;
  bool same_view = false;
  std::string out;
};

void cmd_synth(const SynthOpts& o, std::ostream& out) {
  const auto start = Clock::now();
  SynthConfig cfg;
  cfg.pairs = o.pairs;
  cfg.d_raw = o.d_raw;
  cfg.latent = o.latent;
  cfg.noise = o.noise;
  cfg.seed = o.seed;
  cfg.same_view = o.same_view;
  const SynthData data = generate_pairs(cfg);

  const fs::path dir(o.out);
  ensure_dir(dir);
  const auto d_raw = static_cast<std::uint32_t>(o.d_raw);
  save_store(make_raw_store(data.queries, d_raw), dir / "queries.hvlp");
  save_store(make_raw_store(data.galleries, d_raw), dir / "gallery.hvlp");
  std::vector<std::uint64_t> qids;
  for (const auto& q : data.queries) qids.push_back(q.id);
  write_text(dir / "truth.csv", format_truth(qids, data.truth));

  Manifest m("synth");
  m.config() = {{"pairs", o.pairs}, {"d_raw", o.d_raw},         {"latent", o.latent},
                {"noise", o.noise}, {"same_view", o.same_view}, {"out", o.out}};
  m.seed(o.seed);
  for (const char* f : {"queries.hvlp", "gallery.hvlp", "truth.csv"}) m.artifact(dir / f);
  m.timing("total", ms_since(start));
  m.write(dir / "synth.manifest.json");
  out << "wrote " << o.pairs << " pairs to " << dir.string() << "\n";
}

// ------------------------------------------------------------------- train

struct TrainOpts {
  std::string data;
  std::string dims;
  std::string pools;
  std::size_t epochs = 50;
  double lr = 0.05;
  std::size_t batch = 32;
  std::uint64_t seed = 7;
  std::size_t limit = 0;
  bool vlm = false;
  std::size_t vlm_epochs = 50;
  double vlm_lr = 0.05;
  std::string out;
};

void cmd_train(const TrainOpts& o, std::ostream& out) {
  const auto start = Clock::now();
  const auto dims = to_u32(parse_uint_list(o.dims), "dim");
  std::vector<std::uint32_t> pools(dims.size(), kFullPool);
  if (!o.pools.empty()) pools = to_u32(parse_uint_list(o.pools), "pool");
  const HierSchedule schedule(dims, pools);
  if (o.batch < 2) throw Error(ErrorCode::kDegenerateBatch, "--batch must be >= 2");

  const fs::path data_dir(o.data);
  auto queries = raw_items(load_store(data_dir / "queries.hvlp"));
  auto galleries = raw_items(load_store(data_dir / "gallery.hvlp"));
  if (o.limit > 0) {
    queries.resize(std::min(queries.size(), o.limit));
    galleries.resize(std::min(galleries.size(), o.limit));
  }

  TrainConfig cfg;
  cfg.learning_rate = o.lr;
  cfg.epochs = o.epochs;
  cfg.batch = o.batch;
  cfg.seed = o.seed;
  cfg.train_vlm = o.vlm;
  cfg.vlm_epochs = o.vlm_epochs;
  cfg.vlm_learning_rate = o.vlm_lr;
  const TrainResult result = train_eol(queries, galleries, cfg, schedule);

  const fs::path dir = o.out.empty() ? data_dir : fs::path(o.out);
  ensure_dir(dir);
  save_store(projections_to_store(query_side(result.projections), schedule),
             dir / "proj_query.hvlp");
  save_store(projections_to_store(gallery_side(result.projections), schedule),
             dir / "proj_gallery.hvlp");
  std::ostringstream history;
  history << "epoch,loss\n";
  char buf[64];
  for (std::size_t e = 0; e < result.history.size(); ++e) {
    std::snprintf(buf, sizeof buf, "%.17g", result.history[e]);
    history << e << "," << buf << "\n";
  }
  write_text(dir / "history.csv", history.str());

  Manifest m("train");
  m.config() = {{"data", o.data},   {"dims", schedule.to_string()}, {"epochs", o.epochs},
                {"lr", o.lr},       {"batch", o.batch},             {"limit", o.limit},
                {"vlm", o.vlm},     {"vlm_epochs", o.vlm_epochs},   {"vlm_lr", o.vlm_lr},
                {"out", dir.string()}};
  m.seed(o.seed);
  m.artifact(dir / "proj_query.hvlp");
  m.artifact(dir / "proj_gallery.hvlp");
  m.artifact(dir / "history.csv");
  if (result.scorer) {
    save_store(scorer_to_store(*result.scorer), dir / "scorer.hvlp");
    std::ostringstream vh;
    vh << "epoch,loss\n";
    for (std::size_t e = 0; e < result.vlm_history.size(); ++e) {
      std::snprintf(buf, sizeof buf, "%.17g", result.vlm_history[e]);
      vh << e << "," << buf << "\n";
    }
    write_text(dir / "vlm_history.csv", vh.str());
    m.artifact(dir / "scorer.hvlp");
    m.artifact(dir / "vlm_history.csv");
  }
  m.timing("total", ms_since(start));
  m.write(dir / "train.manifest.json");
  out << "final loss " << fixed(result.history.back(), 9) << " after " << o.epochs
      << " epochs\n";
}

// ------------------------------------------------------------------ encode

struct EncodeOpts {
  std::string proj;
  std::string raw;
  std::string pools;
  std::string out;
};

void cmd_encode(const EncodeOpts& o, std::ostream& out) {
  const auto start = Clock::now();
  const GalleryStore proj_store = load_store(o.proj);
  const auto projections = projections_from_store(proj_store);
  HierSchedule schedule = proj_store.schedule();
  if (!o.pools.empty()) schedule = schedule.with_pools(to_u32(parse_uint_list(o.pools), "pool"));
  const auto items = raw_items(load_store(o.raw));
  if (!items.empty() && items.front().raw.size() != proj_store.d_raw()) {
    throw Error(ErrorCode::kScheduleMismatch, "raw dim does not match projection input dim");
  }
  const auto embeddings = encode_corpus(projections, items, schedule);
  const GalleryStore store = GalleryStore::build(schedule, embeddings);
  save_store(store, o.out);

  Manifest m("encode");
  m.config() = {{"proj", o.proj}, {"raw", o.raw}, {"schedule", schedule.to_string()},
                {"out", o.out}};
  m.artifact(o.out);
  m.timing("total", ms_since(start));
  m.write(sidecar(o.out));
  out << "encoded " << store.size() << " items\n";
}

// ------------------------------------------------------------------ search

struct SearchOpts {
  std::string gallery;
  std::string queries;
  std::string pools;
  std::string rerank;
  std::size_t rerank_depth = 0;
  int workers = 1;
  std::size_t query_begin = 0;
  std::size_t max_queries = 0;
  bool omit_timings = false;
  bool normalize = false;
  std::string out;
};

void cmd_search(const SearchOpts& o, std::ostream& out) {
  const auto start = Clock::now();
  GalleryStore gallery = load_store(o.gallery);
  GalleryStore query_store = load_store(o.queries);
  require_same_dims(gallery, query_store);
  if (o.normalize) {
    gallery = normalized(gallery);
    query_store = normalized(query_store);
  }
  CascadeConfig cfg(resolve_schedule(gallery, o.pools));
  if (!o.rerank.empty()) {
    cfg.rerank = scorer_from_store(load_store(o.rerank));
    cfg.rerank_depth = o.rerank_depth;
  }
  std::vector<std::uint64_t> qids;
  const auto queries = select_queries(query_store, o.query_begin, o.max_queries, qids);

  // Traces of full-pool levels are as long as the gallery, so queries are
  // searched and written in blocks rather than all held at once.
  constexpr std::size_t kBlock = 64;
  std::ofstream file(o.out, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorCode::kIoFailure, "cannot open " + o.out + " for writing");
  std::int64_t wall_ns = 0;
  const std::span<const QueryEmbedding> all(queries);
  for (std::size_t begin = 0; begin < all.size(); begin += kBlock) {
    const auto block = all.subspan(begin, std::min(kBlock, all.size() - begin));
    const BatchResult result = batch_search(block, gallery, cfg, o.workers);
    wall_ns += result.wall_ns;
    for (std::size_t i = 0; i < result.traces.size(); ++i) {
      file << trace_to_json(qids[begin + i], result.traces[i], !o.omit_timings).dump() << "\n";
    }
  }
  file.flush();
  if (!file) throw Error(ErrorCode::kIoFailure, "write failed for " + o.out);

  Manifest m("search");
  m.config() = {{"gallery", o.gallery},         {"queries", o.queries},
                {"schedule", cfg.schedule.to_string()}, {"rerank", o.rerank},
                {"rerank_depth", o.rerank_depth}, {"workers", o.workers},
                {"query_begin", o.query_begin}, {"max_queries", o.max_queries},
                {"normalize", o.normalize},     {"out", o.out}};
  m.artifact(o.out);
  m.timing("search", static_cast<double>(wall_ns) / 1e6);
  m.timing("total", ms_since(start));
  m.write(sidecar(o.out));
  out << "searched " << queries.size() << " queries\n";
}

// ------------------------------------------------------------------- bench

struct BenchOpts {
  std::string gallery;
  std::string queries;
  std::string truth;
  std::string pools;
  std::string ks = "1,5,10";
  int workers = 1;
  std::size_t query_begin = 0;
  std::size_t max_queries = 0;
  bool normalize = false;
  std::string out;
};

void cmd_bench(const BenchOpts& o, std::ostream& out) {
  const auto start = Clock::now();
  GalleryStore gallery = load_store(o.gallery);
  GalleryStore query_store = load_store(o.queries);
  require_same_dims(gallery, query_store);
  if (o.normalize) {
    gallery = normalized(gallery);
    query_store = normalized(query_store);
  }
  if (o.workers < 1) throw Error(ErrorCode::kInvalidArgument, "--workers must be >= 1");
  const CascadeConfig cfg(resolve_schedule(gallery, o.pools));
  const auto ks = parse_ks(o.ks);
  const std::size_t max_k = *std::max_element(ks.begin(), ks.end());

  std::unordered_map<std::uint64_t, std::uint64_t> truth_map;
  for (const auto& [q, g] : read_truth(o.truth)) truth_map[q] = g;

  std::vector<std::uint64_t> qids;
  const auto queries = select_queries(query_store, o.query_begin, o.max_queries, qids);
  if (queries.empty()) throw Error(ErrorCode::kEmptyInput, "no queries selected");
  std::vector<std::uint64_t> truth;
  for (auto id : qids) {
    auto it = truth_map.find(id);
    if (it == truth_map.end()) {
      throw Error(ErrorCode::kMissingGroundTruth, "query " + std::to_string(id));
    }
    truth.push_back(it->second);
  }

  const BatchResult cascade = batch_search(queries, gallery, cfg, o.workers);
  std::size_t final_len = 0;
  for (const auto& t : cascade.traces) final_len = std::max(final_len, t.final.size());
  const std::size_t brute_k = std::max(max_k, final_len);

  std::vector<Ranking> brute(queries.size());
  const std::size_t last = gallery.schedule().levels() - 1;
  const auto brute_start = Clock::now();
  const auto count = static_cast<std::ptrdiff_t>(queries.size());
#pragma omp parallel for num_threads(o.workers) schedule(dynamic, 4)
  for (std::ptrdiff_t i = 0; i < count; ++i) {
    const auto iu = static_cast<std::size_t>(i);
    for (const Scored& s : brute_force_search(queries[iu].levels[last], gallery, brute_k, 1)) {
      brute[iu].push_back(s.id);
    }
  }
  const double brute_ms = ms_since(brute_start);
  const double cascade_ms = static_cast<double>(cascade.wall_ns) / 1e6;

  std::vector<Ranking> pruned(queries.size());
  for (std::size_t i = 0; i < queries.size(); ++i) {
    for (const Scored& s : cascade.traces[i].final) pruned[i].push_back(s.id);
  }

  const double n = static_cast<double>(queries.size());
  std::ostringstream report;
  report << "queries = " << queries.size() << "\n";
  report << "gallery = " << gallery.size() << "\n";
  report << "schedule = " << cfg.schedule.to_string() << "\n";
  report << "workers = " << o.workers << "\n";
  report << "cascade_ms_per_query = " << fixed(cascade_ms / n) << "\n";
  report << "brute_ms_per_query = " << fixed(brute_ms / n) << "\n";
  report << "speedup = " << fixed(cascade_ms > 0 ? brute_ms / cascade_ms : 0.0, 3) << "\n";
  for (std::size_t k : ks) {
    const double rc = recall_at_k(pruned, truth, k);
    const double rb = recall_at_k(brute, truth, k);
    report << "r@" << k << "_cascade = " << fixed(rc) << "\n";
    report << "r@" << k << "_brute = " << fixed(rb) << "\n";
    report << "r@" << k << "_delta = " << fixed(rc - rb) << "\n";
  }
  if (!o.out.empty()) write_text(o.out, report.str());
  out << report.str();

  if (!o.out.empty()) {
    Manifest m("bench");
    m.config() = {{"gallery", o.gallery},     {"queries", o.queries},
                  {"truth", o.truth},         {"schedule", cfg.schedule.to_string()},
                  {"ks", o.ks},               {"workers", o.workers},
                  {"query_begin", o.query_begin}, {"max_queries", o.max_queries},
                  {"normalize", o.normalize}, {"out", o.out}};
    m.artifact(o.out);
    m.timing("cascade", cascade_ms);
    m.timing("brute", brute_ms);
    m.timing("total", ms_since(start));
    m.write(sidecar(o.out));
  }
}

// -------------------------------------------------------------------- cost

struct CostOpts {
  std::string n = "1e9";
  std::string pools = "1e9,1e5,100";
  std::string dims = "128,300,768";
  std::string te = "1000";
  std::uint64_t layers = 12;
  std::uint64_t chunk = 0;
  std::uint64_t unit_mul = 1;
  std::string out;
};

void cmd_cost(const CostOpts& o, std::ostream& out) {
  CostParams p;
  p.gallery = parse_uint_list(o.n).at(0);
  p.counts = parse_uint_list(o.pools);
  p.dims = parse_uint_list(o.dims);
  p.t_e = parse_uint_list(o.te).at(0);
  p.encoder_layers = o.layers;
  p.chunk_layers = o.chunk;
  p.unit_mul = o.unit_mul;
  const CostReport r = hierarchical_cost(p);
  const std::string text = format_cost_report(p, r);
  out << text;
  if (!o.out.empty()) {
    write_text(o.out, text);
    Manifest m("cost");
    m.config() = {{"n", o.n},           {"pools", o.pools},       {"dims", o.dims},
                  {"te", o.te},         {"layers", o.layers},     {"chunk", p.chunk()},
                  {"unit_mul", o.unit_mul}, {"out", o.out}};
    m.artifact(o.out);
    m.write(sidecar(o.out));
  }
}

// -------------------------------------------------------------------- eval

struct EvalOpts {
  std::string results;
  std::string reverse_results;
  std::string truth;
  std::string ks = "1,5,10";
  std::string values;
  std::string out;
};

std::map<std::uint64_t, Ranking> read_rankings(const fs::path& path) {
  std::istringstream in(read_text(path));
  std::map<std::uint64_t, Ranking> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::exception& e) {
      throw Error(ErrorCode::kScheduleMismatch, "bad results line: " + std::string(e.what()));
    }
    Ranking r;
    for (const auto& entry : j.at("final")) r.push_back(entry.at(0).get<std::uint64_t>());
    out[j.at("query").get<std::uint64_t>()] = std::move(r);
  }
  return out;
}

void cmd_eval(const EvalOpts& o, std::ostream& out) {
  const auto start = Clock::now();
  std::string text;
  std::string csv;
  if (!o.values.empty()) {
    const auto values = parse_real_list(o.values);
    const double ar = average_recall(values);
    std::ostringstream t, c;
    for (std::size_t i = 0; i < values.size(); ++i) t << "value_" << i + 1 << " = " << fixed(values[i]) << "\n";
    t << "ar = " << fixed(ar) << "\n";
    for (std::size_t i = 0; i < values.size(); ++i) c << "value_" << i + 1 << ",";
    c << "ar\n";
    for (double v : values) c << fixed(v) << ",";
    c << fixed(ar) << "\n";
    text = t.str();
    csv = c.str();
  } else {
    if (o.results.empty() || o.truth.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "eval needs --values or --results with --truth");
    }
    const auto truth_rows = read_truth(o.truth);
    const auto ks = parse_ks(o.ks);

    std::vector<std::vector<Ranking>> rankings;
    std::vector<std::vector<std::uint64_t>> truths;
    std::vector<std::string> names;
    auto add_direction = [&](const std::string& path, bool reverse, const std::string& name) {
      const auto ranked = read_rankings(path);
      std::vector<Ranking> r;
      std::vector<std::uint64_t> t;
      for (const auto& [q, g] : truth_rows) {
        const std::uint64_t query = reverse ? g : q;
        auto it = ranked.find(query);
        if (it == ranked.end()) continue;
        r.push_back(it->second);
        t.push_back(reverse ? q : g);
      }
      if (r.size() != ranked.size()) {
        throw Error(ErrorCode::kMissingGroundTruth,
                    std::to_string(ranked.size() - r.size()) + " queries in " + path +
                        " have no ground truth");
      }
      rankings.push_back(std::move(r));
      truths.push_back(std::move(t));
      names.push_back(name);
    };
    add_direction(o.results, false, "q2g");
    if (!o.reverse_results.empty()) add_direction(o.reverse_results, true, "g2q");

    std::vector<DirectionInput> inputs;
    for (std::size_t i = 0; i < names.size(); ++i) {
      inputs.push_back({names[i], rankings[i], truths[i]});
    }
    const EvalReport report = evaluate(inputs, ks);
    text = format_eval_text(report);
    csv = format_eval_csv(report);
  }
  out << text;
  if (!o.out.empty()) {
    const fs::path dir(o.out);
    ensure_dir(dir);
    write_text(dir / "eval.txt", text);
    write_text(dir / "eval.csv", csv);
    Manifest m("eval");
    m.config() = {{"results", o.results}, {"reverse_results", o.reverse_results},
                  {"truth", o.truth},     {"ks", o.ks},
                  {"values", o.values},   {"out", o.out}};
    m.artifact(dir / "eval.txt");
    m.artifact(dir / "eval.csv");
    m.timing("total", ms_since(start));
    m.write(dir / "eval.manifest.json");
  }
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kIoFailure:
    case ErrorCode::kBadMagic:
    case ErrorCode::kUnsupportedVersion:
    case ErrorCode::kTruncatedFile:
    case ErrorCode::kChecksumMismatch:
      return kExitIo;
    case ErrorCode::kDivergenceDetected:
    case ErrorCode::kNonFiniteLoss:
    case ErrorCode::kNonFinite:
      return kExitDivergence;
    case ErrorCode::kScheduleMismatch:
    case ErrorCode::kDimMismatch:
    case ErrorCode::kUnknownId:
    case ErrorCode::kMissingGroundTruth:
    case ErrorCode::kEmptyGallery:
      return kExitMismatch;
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kInvalidSchedule:
    case ErrorCode::kDegenerateBatch:
    case ErrorCode::kEmptyInput:
    case ErrorCode::kIndexOutOfRange:
    case ErrorCode::kLevelOutOfRange:
      return kExitUsage;
    case ErrorCode::kDuplicateId:
      return kExitMismatch;
  }
  return kExitInternal;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Coarse-to-fine hierarchical embedding retrieval toolkit", "hiercascade"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  SynthOpts synth;
  auto* s = app.add_subcommand("synth", "Generate a synthetic paired dataset");
  s->add_option("--pairs", synth.pairs, "Number of pairs")->capture_default_str();
  s->add_option("--d-raw", synth.d_raw, "Raw feature dimension")->capture_default_str();
  s->add_option("--latent", synth.latent, "Latent factor dimension")->capture_default_str();
  s->add_option("--noise", synth.noise, "Noise standard deviation")->capture_default_str();
  s->add_option("--seed", synth.seed, "Random seed")->capture_default_str();
  s->add_flag("--same-view", synth.same_view, "Share one mixing matrix between both sides");
  s->add_option("--out", synth.out, "Output directory")->required();

  TrainOpts train;
  auto* t = app.add_subcommand("train", "Fit per-level projections with the hierarchical loss");
  t->add_option("--data", train.data, "Dataset directory")->required();
  t->add_option("--dims", train.dims, "Per-level dims, e.g. 8,16,32")->required();
  t->add_option("--pools", train.pools, "Per-level pool sizes, 0 = full pool");
  t->add_option("--epochs", train.epochs)->capture_default_str();
  t->add_option("--lr", train.lr)->capture_default_str();
  t->add_option("--batch", train.batch)->capture_default_str();
  t->add_option("--seed", train.seed)->capture_default_str();
  t->add_option("--limit", train.limit, "Train on the first N pairs only (0 = all)");
  t->add_flag("--vlm", train.vlm, "Also fit a matching scorer for re-ranking");
  t->add_option("--vlm-epochs", train.vlm_epochs)->capture_default_str();
  t->add_option("--vlm-lr", train.vlm_lr)->capture_default_str();
  t->add_option("--out", train.out, "Output directory (default: --data)");

  EncodeOpts encode;
  auto* e = app.add_subcommand("encode", "Project raw items into a hierarchical store");
  e->add_option("--proj", encode.proj, "Projection file")->required();
  e->add_option("--raw", encode.raw, "Raw item store")->required();
  e->add_option("--pools", encode.pools, "Override the pool schedule");
  e->add_option("--out", encode.out, "Output store")->required();

  SearchOpts search;
  auto* q = app.add_subcommand("search", "Cascade search, one JSON line per query");
  q->add_option("--gallery", search.gallery)->required();
  q->add_option("--queries", search.queries)->required();
  q->add_option("--pools", search.pools, "Per-level pool sizes, 0 = full pool");
  q->add_option("--rerank", search.rerank, "Matching scorer file");
  q->add_option("--rerank-depth", search.rerank_depth, "Re-rank the top R (0 = final pool)");
  q->add_option("--workers", search.workers)->capture_default_str()->check(CLI::PositiveNumber);
  q->add_option("--query-begin", search.query_begin);
  q->add_option("--max-queries", search.max_queries, "0 = all");
  q->add_flag("--omit-timings", search.omit_timings, "Leave stage timings out of the output");
  q->add_flag("--normalize", search.normalize, "L2-normalize every vector before scoring");
  q->add_option("--out", search.out, "JSON-lines output")->required();

  BenchOpts bench;
  auto* b = app.add_subcommand("bench", "Pruned cascade vs flat full-dimension scan");
  b->add_option("--gallery", bench.gallery)->required();
  b->add_option("--queries", bench.queries)->required();
  b->add_option("--truth", bench.truth)->required();
  b->add_option("--pools", bench.pools);
  b->add_option("--ks", bench.ks)->capture_default_str();
  b->add_option("--workers", bench.workers)->capture_default_str()->check(CLI::PositiveNumber);
  b->add_option("--query-begin", bench.query_begin);
  b->add_option("--max-queries", bench.max_queries, "0 = all");
  b->add_flag("--normalize", bench.normalize);
  b->add_option("--out", bench.out, "Summary file");

  CostOpts cost;
  auto* c = app.add_subcommand("cost", "Analytic retrieval-time model");
  c->add_option("--n", cost.n, "Gallery size")->capture_default_str();
  c->add_option("--pools", cost.pools, "Candidates scanned per level")->capture_default_str();
  c->add_option("--dims", cost.dims)->capture_default_str();
  c->add_option("--te", cost.te, "Encode time per layer")->capture_default_str();
  c->add_option("--layers", cost.layers, "Encoder layers")->capture_default_str();
  c->add_option("--chunk", cost.chunk, "Layers per early output (0 = layers / levels)");
  c->add_option("--unit-mul", cost.unit_mul)->capture_default_str();
  c->add_option("--out", cost.out, "Also write the report here");

  EvalOpts eval;
  auto* v = app.add_subcommand("eval", "Recall@K and average recall");
  v->add_option("--results", eval.results, "JSON-lines search output");
  v->add_option("--reverse-results", eval.reverse_results,
                "Search output for the opposite direction");
  v->add_option("--truth", eval.truth, "Ground-truth CSV");
  v->add_option("--ks", eval.ks)->capture_default_str();
  v->add_option("--values", eval.values, "Average these recall values instead");
  v->add_option("--out", eval.out, "Output directory");

  std::vector<std::string> argv_storage{"hiercascade"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& a : argv_storage) argv.push_back(a.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::CallForVersion& ex) {
    return app.exit(ex, out, err);
  } catch (const CLI::ParseError& ex) {
    app.exit(ex, err, err);
    return kExitUsage;
  }

  try {
    if (*s) cmd_synth(synth, out);
    else if (*t) cmd_train(train, out);
    else if (*e) cmd_encode(encode, out);
    else if (*q) cmd_search(search, out);
    else if (*b) cmd_bench(bench, out);
    else if (*c) cmd_cost(cost, out);
    else if (*v) cmd_eval(eval, out);
  } catch (const Error& ex) {
    err << "error: " << ex.what() << "\n";
    return exit_code_for(ex.code());
  } catch (const std::exception& ex) {
    err << "internal error: " << ex.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace hiercascade::cli
