#include "filterloss/report.hpp"

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <sstream>

#include "filterloss/error.hpp"
#include "filterloss/random.hpp"

namespace filterloss {

std::string format_double(double v) {
  char buf[64];
  const auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

namespace {

Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

std::string optional_csv(const std::optional<double>& v) { return v ? format_double(*v) : ""; }

Json class_similarity_json(const ClassSimilarity& c) {
  return {{"class", c.name},
          {"n", c.n},
          {"pairs", c.pairs},
          {"mean_euclid", optional_json(c.mean_euclid)},
          {"mean_cosine", optional_json(c.mean_cosine)},
          {"zero_norm_pairs", c.zero_norm_pairs}};
}

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

}  // namespace

Json distribution_json(const LabeledDataset& ds) {
  Json classes = Json::array();
  for (const ClassShare& s : class_distribution(ds)) {
    classes.push_back({{"class", s.name}, {"count", s.count}, {"proportion", s.proportion}});
  }
  return {{"n", ds.n()}, {"imbalance_ratio", imbalance_ratio(ds)}, {"classes", classes}};
}

Json similarity_json(const LabelSimilarityReport& report) {
  Json classes = Json::array();
  for (const auto& c : report.classes) classes.push_back(class_similarity_json(c));
  return {{"reference", report.reference == SimilarityReference::Pairwise ? "pairwise" : "centroid"},
          {"classes", classes}};
}

Json cross_json(const std::vector<CrossClassRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows) {
    out.push_back({{"class", r.name},
                   {"a", class_similarity_json(r.a)},
                   {"b", class_similarity_json(r.b)},
                   {"delta_euclid", optional_json(r.delta_euclid)},
                   {"delta_cosine", optional_json(r.delta_cosine)}});
  }
  return out;
}

Json resample_json(const ResampleResult& result) {
  Json params = Json::object();
  for (const auto& [k, v] : result.params) params[k] = v;
  return {{"method", result.method},
          {"params", params},
          {"kept", result.keep_indices.size()},
          {"keep_indices", result.keep_indices},
          {"synthetic", result.synthetic ? result.synthetic->size() : 0}};
}

Json weight_histogram_json(const std::vector<WeightClassSize>& bins) {
  Json out = Json::array();
  for (const auto& b : bins) out.push_back({{"weight", b.weight}, {"count", b.count}});
  return out;
}

Json eval_json(const EvalReport& report) {
  Json per_class = Json::array();
  for (const auto& m : report.per_class) {
    per_class.push_back({{"class", m.name},
                         {"support", m.support},
                         {"predicted", m.predicted},
                         {"precision", m.precision},
                         {"recall", m.recall},
                         {"f1", m.f1},
                         {"absent", m.absent}});
  }
  return {{"accuracy", report.accuracy},
          {"macro_f1", report.macro_f1},
          {"weighted_f1", report.weighted_f1},
          {"total", report.total},
          {"per_class", per_class},
          {"confusion", report.confusion}};
}

Json history_json(const std::vector<EpochRecord>& history) {
  Json out = Json::array();
  for (const auto& e : history) {
    out.push_back({{"epoch", e.epoch},
                   {"train_loss", e.train_loss},
                   {"eval_accuracy", optional_json(e.eval_accuracy)},
                   {"eval_macro_f1", optional_json(e.eval_macro_f1)}});
  }
  return out;
}

Json bench_json(const BenchResult& bench) {
  Json cells = Json::array();
  for (const auto& c : bench.cells) {
    Json cell = {{"strategy", c.strategy}, {"loss", c.loss}, {"replicate", c.replicate},
                 {"ok", c.ok}};
    if (c.ok) {
      cell["train_size"] = c.train_size;
      cell["stability"] = c.stability;
      cell["eval"] = eval_json(c.report);
      cell["history"] = history_json(c.history);
    } else {
      cell["error"] = c.error;
    }
    cells.push_back(std::move(cell));
  }
  Json summary = Json::array();
  for (const auto& s : bench.summary) {
    summary.push_back({{"strategy", s.strategy},
                       {"loss", s.loss},
                       {"ok_replicates", s.ok_replicates},
                       {"accuracy_mean", s.accuracy_mean},
                       {"accuracy_std", s.accuracy_std},
                       {"macro_f1_mean", s.macro_f1_mean},
                       {"macro_f1_std", s.macro_f1_std},
                       {"stability_mean", s.stability_mean}});
  }
  return {{"any_failed", bench.any_failed}, {"summary", summary}, {"cells", cells}};
}

std::string similarity_csv(const LabelSimilarityReport& report) {
  std::ostringstream out;
  out << "class,n,pairs,mean_euclid,mean_cosine\n";
  for (const auto& c : report.classes) {
    out << c.name << ',' << c.n << ',' << c.pairs << ',' << optional_csv(c.mean_euclid) << ','
        << optional_csv(c.mean_cosine) << '\n';
  }
  return out.str();
}

std::string cross_csv(const std::vector<CrossClassRow>& rows) {
  std::ostringstream out;
  out << "class,euclid_a,euclid_b,delta_euclid,cosine_a,cosine_b,delta_cosine\n";
  for (const auto& r : rows) {
    out << r.name << ',' << optional_csv(r.a.mean_euclid) << ',' << optional_csv(r.b.mean_euclid)
        << ',' << optional_csv(r.delta_euclid) << ',' << optional_csv(r.a.mean_cosine) << ','
        << optional_csv(r.b.mean_cosine) << ',' << optional_csv(r.delta_cosine) << '\n';
  }
  return out.str();
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::ostringstream out;
  out << "epoch,train_loss,eval_accuracy,eval_macro_f1\n";
  for (const auto& e : history) {
    out << e.epoch << ',' << format_double(e.train_loss) << ',' << optional_csv(e.eval_accuracy)
        << ',' << optional_csv(e.eval_macro_f1) << '\n';
  }
  return out.str();
}

std::string weight_histogram_csv(const std::vector<WeightClassSize>& bins) {
  std::ostringstream out;
  out << "weight,count\n";
  for (const auto& b : bins) out << format_double(b.weight) << ',' << b.count << '\n';
  return out.str();
}

std::string bench_table_csv(const BenchResult& bench, const std::vector<std::string>& losses) {
  std::vector<std::string> strategies;
  for (const auto& s : bench.summary) {
    if (strategies.empty() || strategies.back() != s.strategy) strategies.push_back(s.strategy);
  }
  std::ostringstream out;
  out << "strategy";
  for (const auto& l : losses) out << ',' << l;
  out << '\n';
  for (const auto& s : strategies) {
    out << s;
    for (const auto& l : losses) {
      const SummaryCell* cell = bench.find(s, l);
      out << ',';
      if (!cell || cell->ok_replicates == 0) {
        out << "failed";
        continue;
      }
      out << fixed(cell->accuracy_mean, 4) << "±" << fixed(cell->accuracy_std, 4) << " / "
          << fixed(cell->macro_f1_mean, 4) << "±" << fixed(cell->macro_f1_std, 4);
    }
    out << '\n';
  }
  return out.str();
}

std::string bench_cells_csv(const BenchResult& bench) {
  std::ostringstream out;
  out << "strategy,loss,replicate,ok,train_size,accuracy,macro_f1,stability,error\n";
  for (const auto& c : bench.cells) {
    out << c.strategy << ',' << c.loss << ',' << c.replicate << ',' << (c.ok ? 1 : 0) << ',';
    if (c.ok) {
      out << c.train_size << ',' << format_double(c.report.accuracy) << ','
          << format_double(c.report.macro_f1) << ',' << format_double(c.stability) << ',';
    } else {
      std::string err = c.error;
      for (char& ch : err) {
        if (ch == ',' || ch == '\n') ch = ' ';
      }
      out << ",,,," << err;
    }
    out << '\n';
  }
  return out.str();
}

Json make_meta(double seconds) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char stamp[32];
  std::strftime(stamp, sizeof stamp, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  return {{"timestamp", stamp}, {"duration_seconds", seconds}};
}

Json make_report(Json results, Json meta) {
  return {{"results", std::move(results)}, {"meta", std::move(meta)}};
}

std::string results_digest(const Json& report) {
  const std::uint64_t h = hash_name(report.at("results").dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  require(static_cast<bool>(out), ErrorKind::Io, "cannot write " + path.string());
  out << text;
  require(static_cast<bool>(out), ErrorKind::Io, "write failed for " + path.string());
}

void write_json(const std::filesystem::path& path, const Json& doc) {
  write_text(path, doc.dump(2) + "\n");
}

}  // namespace filterloss
