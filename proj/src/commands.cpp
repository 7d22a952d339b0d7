#include "pairlab/commands.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>

#include "pairlab/error.hpp"
#include "pairlab/eval.hpp"

namespace pairlab {

namespace {

// Shortest text that parses back to the same double.
std::string num(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::ofstream open_output(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return out;
}

void begin_csv(std::ostream& out, const std::string& comment, const std::string& header) {
  out << "# " << comment << '\n' << header << '\n';
}

std::string command_comment(const char* command, const ExperimentConfig& config) {
  return std::string("pairlab ") + command + " " + describe_config(config.values);
}

// Weight mass of a P x K batch against the whole training set, self pairs removed.
ContributionHistogram batch_contributions(const TrainConfig& config, const MlpEncoderParams& params,
                                          const VectorDataset& train_set) {
  std::mt19937_64 rng(derive_seed(config.seed, 17));
  const Batch batch = sample_batch(train_set, config.classes_per_batch, config.samples_per_class, rng);
  const Matrix anchors = encode(params, batch.inputs);
  const Matrix candidates = encode(params, train_set.inputs());
  const Matrix sim = similarity_matrix(anchors, candidates);
  PairPartition partition = partition_pairs(batch.labels, train_set.labels(), false);
  for (std::size_t i = 0; i < partition.num_anchors(); ++i) {
    auto& pos = partition.anchors[i].positives;
    std::erase(pos, batch.indices[i]);
    partition.anchors[i].self_index = batch.indices[i];
  }
  return gradient_contribution_histogram(config.scheme, sim, partition, UniformBins{});
}

}  // namespace

void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve, const std::string& comment) {
  begin_csv(out, comment, "similarity,w_pos,w_neg");
  for (const auto& p : curve) out << num(p.similarity) << ',' << num(p.w_pos) << ',' << num(p.w_neg) << '\n';
}

void write_run_csv(std::ostream& out, const RunRecord& record, const std::string& comment) {
  begin_csv(out, comment, "iteration,loss,hard_negatives,drift");
  for (const auto& r : record.iterations) {
    out << r.iteration << ',' << num(r.loss) << ',' << r.hard_negatives << ',';
    if (r.drift) out << num(*r.drift);
    out << '\n';
  }
}

void write_recall_csv(std::ostream& out, const RunRecord& record, const std::string& comment) {
  begin_csv(out, comment, "iteration,k,recall");
  for (const auto& e : record.evaluations) {
    for (const auto& [k, r] : e.recall) out << e.iteration << ',' << k << ',' << num(r) << '\n';
  }
}

void write_histogram_csv(std::ostream& out, const SimilarityHistograms& h, const std::string& comment) {
  begin_csv(out, comment, "bin_lo,bin_hi,positive,negative");
  for (std::size_t b = 0; b < h.bins.count; ++b) {
    out << num(h.bins.lower_edge(b)) << ',' << num(h.bins.lower_edge(b + 1)) << ',' << h.positive[b] << ',' << h.negative[b]
        << '\n';
  }
}

void write_histogram_csv(std::ostream& out, const ContributionHistogram& h, const std::string& comment) {
  begin_csv(out, comment, "bin_lo,bin_hi,positive,negative");
  for (std::size_t b = 0; b < h.bins.count; ++b) {
    out << num(h.bins.lower_edge(b)) << ',' << num(h.bins.lower_edge(b + 1)) << ',' << num(h.positive_mass[b]) << ','
        << num(h.negative_mass[b]) << '\n';
  }
}

void write_grid_csv(std::ostream& out, const std::vector<GridAxis>& axes, const std::vector<GridRow>& rows,
                    const std::string& comment) {
  std::string header;
  for (const auto& a : axes) header += a.name + ",";
  header += "status,recall_at_1,final_loss,mean_drift,mean_hard_negatives";
  begin_csv(out, comment, header);
  for (const auto& row : rows) {
    for (const auto& [name, v] : row.point) out << num(v) << ',';
    out << to_string(row.status) << ',' << num(row.recall_at_1) << ',' << num(row.final_loss) << ','
        << num(row.mean_drift) << ',' << num(row.mean_hard_negatives) << '\n';
  }
}

int cmd_curves(const ExperimentConfig& config, const CurveGridSpec& grid, const std::filesystem::path& out_path,
               std::ostream& out) {
  config.train.scheme.validate();
  if (!(grid.lo >= -1.0 && grid.hi <= 1.0 && grid.lo <= grid.hi)) {
    throw ConfigError("curve grid must satisfy -1 <= lo <= hi <= 1");
  }
  const auto points = uniform_grid(grid.lo, grid.hi, grid.points);
  const auto curve = sample_weight_curve(config.train.scheme, points, grid.context);
  std::ostringstream comment;
  comment << "pairlab curves scheme=" << config.train.scheme.describe() << " grid=[" << num(grid.lo) << ","
          << num(grid.hi) << "]x" << grid.points << " reference_positive=" << num(grid.context.reference_positive)
          << " reference_negative=" << num(grid.context.reference_negative);
  if (out_path.empty()) {
    write_curve_csv(out, curve, comment.str());
  } else {
    auto file = open_output(out_path);
    write_curve_csv(file, curve, comment.str());
  }
  return kExitOk;
}

std::string mode_label(const TrainConfig& config) {
  if (config.mode == TrainMode::MiniBatch) return "minibatch";
  if (config.momentum == 0.0) return "memory (XBM-equivalent)";
  std::ostringstream os;
  os << "memory (momentum " << config.momentum << ")";
  return os.str();
}

int cmd_train(const ExperimentConfig& config, const std::filesystem::path& out_dir, std::ostream& log) {
  config.train.validate();
  const auto [train_set, test_set] = load_experiment_data(config.data);
  const auto comment = command_comment("train", config);
  std::filesystem::create_directories(out_dir);

  std::optional<TrainResult> result;
  std::string failure;
  try {
    result = train(config.train, train_set, &test_set);
  } catch (const TrainingDiverged& e) {
    failure = e.what();
  }

  double recall1 = 0.0;
  bool collapsed = !failure.empty();
  if (result) {
    recall1 = evaluate_encoder(result->params, test_set, std::vector<std::size_t>{1}).at(1);
    collapsed = config.train.iterations > 0 && recall1 < collapse_threshold(test_set);
  }

  {
    auto f = open_output(out_dir / "summary.csv");
    begin_csv(f, comment,
              "mode,scheme,iterations,final_loss,mean_hard_negatives,mean_drift,recall_at_1,status");
    f << '"' << mode_label(config.train) << "\",\"" << config.train.scheme.describe() << "\","
      << config.train.iterations << ',';
    if (result && !result->record.iterations.empty()) {
      f << num(result->record.iterations.back().loss) << ',' << num(result->record.mean_hard_negatives()) << ','
        << num(result->record.mean_drift());
    } else {
      f << ",,";
    }
    f << ',' << num(recall1) << ',' << (collapsed ? "collapsed" : "ok") << '\n';
  }

  log << "mode: " << mode_label(config.train) << '\n'
      << "scheme: " << config.train.scheme.describe() << '\n'
      << "iterations: " << config.train.iterations << '\n';
  if (!failure.empty()) log << "failure: " << failure << '\n';

  if (result) {
    const auto& rec = result->record;
    { auto f = open_output(out_dir / "run.csv"); write_run_csv(f, rec, comment); }
    { auto f = open_output(out_dir / "recall.csv"); write_recall_csv(f, rec, comment); }
    {
      auto f = open_output(out_dir / "drift.csv");
      begin_csv(f, comment, "iteration,drift");
      for (const auto& r : rec.iterations) {
        if (r.drift) f << r.iteration << ',' << num(*r.drift) << '\n';
      }
    }
    {
      auto f = open_output(out_dir / "hard_negatives.csv");
      begin_csv(f, comment, "iteration,hard_negatives");
      for (const auto& r : rec.iterations) f << r.iteration << ',' << r.hard_negatives << '\n';
    }
    {
      const Matrix test_embed = encode(result->params, test_set.inputs());
      auto f = open_output(out_dir / "distributions.csv");
      write_histogram_csv(f, similarity_distributions(test_embed, test_set.labels()), comment);
    }
    {
      auto f = open_output(out_dir / "contributions.csv");
      write_histogram_csv(f, batch_contributions(config.train, result->params, train_set), comment);
    }
    save_params(result->params, out_dir / "params.bin");
    if (!rec.iterations.empty()) log << "final loss: " << rec.iterations.back().loss << '\n';
    for (const auto& [k, r] : evaluate_encoder(result->params, test_set, config.train.recall_ks)) {
      log << "recall@" << k << ": " << r << '\n';
    }
  }
  log << "status: " << (collapsed ? "collapsed" : "ok") << '\n';
  return collapsed ? kExitCollapse : kExitOk;
}

std::vector<GridAxis> parse_axes(const std::vector<std::string>& specs) {
  std::vector<GridAxis> axes;
  for (const auto& spec : specs) {
    const auto eq = spec.find('=');
    if (eq == std::string::npos || eq == 0) throw ConfigError("grid axis '" + spec + "': expected name=v1,v2,...");
    GridAxis axis{spec.substr(0, eq), {}};
    std::stringstream ss(spec.substr(eq + 1));
    std::string item;
    while (std::getline(ss, item, ',')) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(item, &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != item.size() || !std::isfinite(v)) {
        throw ConfigError("grid axis '" + axis.name + "': bad value '" + item + "'");
      }
      axis.values.push_back(v);
    }
    if (axis.values.empty()) throw ConfigError("grid axis '" + axis.name + "' has no values");
    for (const auto& other : axes) {
      if (other.name == axis.name) throw ConfigError("grid axis '" + axis.name + "' given twice");
    }
    axes.push_back(std::move(axis));
  }
  return axes;
}

int cmd_grid(const ExperimentConfig& config, const std::vector<GridAxis>& axes, std::size_t jobs,
             const std::filesystem::path& out_path, std::ostream& log) {
  {
    TrainConfig probe = config.train;
    for (const auto& axis : axes) {
      try {
        apply_parameter(probe, axis.name, axis.values.front());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
      }
    }
  }
  const auto [train_set, test_set] = load_experiment_data(config.data);
  const auto rows = grid_run(config.train, axes, train_set, test_set, jobs);
  auto f = open_output(out_path);
  write_grid_csv(f, axes, rows, command_comment("grid", config));
  std::size_t collapsed = 0, invalid = 0;
  for (const auto& r : rows) {
    collapsed += r.status == GridStatus::Collapsed;
    invalid += r.status == GridStatus::Invalid;
  }
  log << rows.size() << " grid points: " << rows.size() - collapsed - invalid << " ok, " << collapsed
      << " collapsed, " << invalid << " invalid\n";
  return kExitOk;
}

DriftComparison run_drift_comparison(const ExperimentConfig& config, const VectorDataset& train_set) {
  if (config.train.drift_interval == 0) throw ConfigError("drift comparison needs drift_interval > 0");
  TrainConfig mb = config.train;
  mb.mode = TrainMode::MiniBatch;
  TrainConfig xbm = config.train;
  xbm.mode = TrainMode::Memory;
  xbm.momentum = 0.0;
  TrainConfig smoco = xbm;
  smoco.momentum = config.train.momentum > 0.0 ? config.train.momentum : 0.999;
  return {train(mb, train_set).record, train(xbm, train_set).record, train(smoco, train_set).record};
}

void write_drift_csv(std::ostream& out, const DriftComparison& runs, std::size_t interval, const std::string& comment) {
  begin_csv(out, comment,
            "iteration,drift_minibatch,drift_xbm,drift_smoco,hard_negatives_minibatch,hard_negatives_xbm,"
            "hard_negatives_smoco");
  out << "0,0,0,0,0,0,0\n";
  const auto n = runs.minibatch.iterations.size();
  for (std::size_t t = interval; t <= n && interval > 0; t += interval) {
    auto drift_at = [&](const RunRecord& r) { return r.iterations[t - 1].drift.value_or(0.0); };
    const std::size_t first = t - interval + 1;
    out << t << ',' << num(drift_at(runs.minibatch)) << ',' << num(drift_at(runs.xbm)) << ','
        << num(drift_at(runs.smoco)) << ',' << num(runs.minibatch.mean_hard_negatives(first, t)) << ','
        << num(runs.xbm.mean_hard_negatives(first, t)) << ',' << num(runs.smoco.mean_hard_negatives(first, t)) << '\n';
  }
}

int cmd_drift(const ExperimentConfig& config, const std::filesystem::path& out_path, std::ostream& log) {
  config.train.validate();
  const auto [train_set, test_set] = load_experiment_data(config.data);
  const auto runs = run_drift_comparison(config, train_set);
  auto f = open_output(out_path);
  write_drift_csv(f, runs, config.train.drift_interval, command_comment("drift", config));
  log << "mean drift  minibatch=" << runs.minibatch.mean_drift() << " xbm=" << runs.xbm.mean_drift()
      << " smoco=" << runs.smoco.mean_drift() << '\n'
      << "mean hard negatives  minibatch=" << runs.minibatch.mean_hard_negatives()
      << " xbm=" << runs.xbm.mean_hard_negatives() << " smoco=" << runs.smoco.mean_hard_negatives() << '\n';
  return kExitOk;
}

}  // namespace pairlab
