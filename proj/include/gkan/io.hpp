#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "gkan/graph.hpp"
#include "gkan/interpret.hpp"
#include "gkan/metrics.hpp"
#include "gkan/model.hpp"
#include "gkan/synth.hpp"
#include "gkan/training.hpp"

namespace gkan::io {

// Shortest decimal text that parses back to exactly the same double.
std::string format_real(double v);

// --- cohort files -----------------------------------------------------------
// Header "subject_id,label,<roi_0>,...,<roi_{N-1}>", one row per subject.
// The label column holds a group name (e.g. CN, MCI, AD).

std::string cohort_to_csv(const GroupedCohort& cohort);
GroupedCohort parse_cohort_csv(const std::string& text, const std::string& source = "<cohort>");
void write_cohort(const std::filesystem::path& path, const GroupedCohort& cohort);
GroupedCohort read_cohort(const std::filesystem::path& path);

// Keeps subjects whose group is `negative` (label 0) or `positive` (label 1).
CohortTable select_task(const GroupedCohort& cohort, const std::string& negative,
                        const std::string& positive);

// Parses "A:B" into {A, B}.
std::pair<std::string, std::string> parse_task(const std::string& text);

// --- adjacency export -------------------------------------------------------

std::string adjacency_to_csv(const Matrix& adjacency, const std::vector<std::string>& roi_names);
void write_adjacency(const std::filesystem::path& csv_path, const RoiGraph& graph,
                     const std::vector<std::string>& roi_names, std::size_t subjects_used);

// --- checkpoints ------------------------------------------------------------

struct Checkpoint {
  TrainConfig config;
  std::vector<std::string> roi_names;
  std::string task_negative;
  std::string task_positive;
  RoiGraph graph;
  ModelParams params;
};

std::string checkpoint_to_json(const Checkpoint& ckpt);
Checkpoint parse_checkpoint(const std::string& text, const std::string& source = "<checkpoint>");
void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint read_checkpoint(const std::filesystem::path& path);

// --- reports ----------------------------------------------------------------

std::string report_to_json(const EvalReport& report);
std::string per_subject_csv(const EvalReport& report);
std::string history_csv(const std::vector<EpochRecord>& history);
// Table-style block: model name, accuracy, AUC-ROC and F1 as "mean ±std".
std::string aggregate_table(const std::vector<std::pair<std::string, AggregateReport>>& rows);
std::string cv_summary_json(const CvResult& cv, const TrainConfig& config);

std::string saliency_csv(const ImportanceReport& report, const std::vector<std::string>& roi_names);
std::string unit_scores_csv(const ImportanceReport& report);

// --- files and digests ------------------------------------------------------

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& contents);
std::string sha256_hex(const std::string& bytes);

std::string config_to_json(const TrainConfig& config);

}  // namespace gkan::io
