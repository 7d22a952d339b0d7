#pragma once

// Experiment drivers behind the command-line tool. Each writes CSV files that
// start with a "# ..." line holding the resolved configuration, followed by a
// header row.

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "pairlab/config.hpp"
#include "pairlab/trainer.hpp"
#include "pairlab/weighting.hpp"

namespace pairlab {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitRuntime = 2, kExitCollapse = 3 };

struct CurveGridSpec {
  double lo = -1.0;
  double hi = 1.0;
  std::size_t points = 201;
  CurveContext context;
};

// ---- CSV writers ----

/// similarity,w_pos,w_neg
void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve, const std::string& comment);
/// iteration,loss,hard_negatives,drift (drift empty where not measured)
void write_run_csv(std::ostream& out, const RunRecord& record, const std::string& comment);
/// iteration,k,recall
void write_recall_csv(std::ostream& out, const RunRecord& record, const std::string& comment);
/// bin_lo,bin_hi,positive,negative
void write_histogram_csv(std::ostream& out, const SimilarityHistograms& h, const std::string& comment);
void write_histogram_csv(std::ostream& out, const ContributionHistogram& h, const std::string& comment);
/// <axis names>,status,recall_at_1,final_loss,mean_drift,mean_hard_negatives
void write_grid_csv(std::ostream& out, const std::vector<GridAxis>& axes, const std::vector<GridRow>& rows,
                    const std::string& comment);

// ---- commands ----

/// Weight curves of the configured scheme. Writes to `out_path`, or `out` when the path is empty.
int cmd_curves(const ExperimentConfig& config, const CurveGridSpec& grid, const std::filesystem::path& out_path,
               std::ostream& out);

/// "minibatch", "memory (XBM-equivalent)" or "memory (momentum m)".
std::string mode_label(const TrainConfig& config);

/// Trains once and writes run.csv, recall.csv, summary.csv, drift.csv,
/// hard_negatives.csv, distributions.csv, contributions.csv and params.bin
/// into `out_dir`. Returns kExitCollapse when the run collapsed.
int cmd_train(const ExperimentConfig& config, const std::filesystem::path& out_dir, std::ostream& log);

/// Parses "name=v1,v2,..." axis specs. Throws ConfigError on malformed input.
std::vector<GridAxis> parse_axes(const std::vector<std::string>& specs);

/// One row per grid point. Unknown axis names raise ConfigError before any training.
int cmd_grid(const ExperimentConfig& config, const std::vector<GridAxis>& axes, std::size_t jobs,
             const std::filesystem::path& out_path, std::ostream& log);

struct DriftComparison {
  RunRecord minibatch;
  RunRecord xbm;
  RunRecord smoco;
};

/// Runs mini-batch, memory with momentum 0, and memory with the configured
/// momentum (0.999 if the configured one is 0) from one seed.
DriftComparison run_drift_comparison(const ExperimentConfig& config, const VectorDataset& train_set);

/// iteration,drift_minibatch,drift_xbm,drift_smoco,hard_negatives_minibatch,hard_negatives_xbm,hard_negatives_smoco
/// One row at iteration 0 and at every drift checkpoint; hard-negative columns
/// are per-iteration means over the interval ending at that row.
void write_drift_csv(std::ostream& out, const DriftComparison& runs, std::size_t interval, const std::string& comment);

int cmd_drift(const ExperimentConfig& config, const std::filesystem::path& out_path, std::ostream& log);

}  // namespace pairlab
