#include "gkan/io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "gkan/errors.hpp"
#include "json.hpp"

namespace gkan::io {

using nlohmann::json;

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char ch : line) {
    if (ch == sep) {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

bool parse_real(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

json matrix_json(const Matrix& m) {
  json rows = json::array();
  for (std::size_t r = 0; r < m.rows(); ++r) {
    auto row = m.row(r);
    rows.push_back(std::vector<double>(row.begin(), row.end()));
  }
  return {{"shape", {m.rows(), m.cols()}}, {"values", rows}};
}

Matrix matrix_from_json(const json& j, const std::string& what) {
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 2) throw ParseError(what, 0, "expected a 2-axis shape");
  const auto& rows = j.at("values");
  if (rows.size() != shape[0]) throw ParseError(what, 0, "row count does not match shape");
  Matrix m(shape[0], shape[1]);
  for (std::size_t r = 0; r < shape[0]; ++r) {
    const auto vals = rows[r].get<std::vector<double>>();
    if (vals.size() != shape[1]) throw ParseError(what, 0, "column count does not match shape");
    std::copy(vals.begin(), vals.end(), m.row(r).begin());
  }
  return m;
}

// KAN coefficients as c[i][j][k] with shape [out, in, grid].
json kan_json(const KanLayer& layer) {
  const std::size_t out = layer.out_features(), in = layer.in_features(), g = layer.grid_size;
  json outer = json::array();
  for (std::size_t i = 0; i < out; ++i) {
    json mid = json::array();
    for (std::size_t j = 0; j < in; ++j) {
      std::vector<double> ks(g);
      for (std::size_t k = 0; k < g; ++k) ks[k] = layer.coeff(i, j, k);
      mid.push_back(std::move(ks));
    }
    outer.push_back(std::move(mid));
  }
  return {{"shape", {out, in, g}}, {"values", outer}, {"epsilon", layer.epsilon}};
}

KanLayer kan_from_json(const json& j, const std::string& what) {
  const auto shape = j.at("shape").get<std::vector<std::size_t>>();
  if (shape.size() != 3 || shape[2] == 0) throw ParseError(what, 0, "expected a 3-axis shape");
  KanLayer layer = KanLayer::zeros(shape[1], shape[0], shape[2]);
  layer.epsilon = j.at("epsilon").get<double>();
  const auto& vals = j.at("values");
  if (vals.size() != shape[0]) throw ParseError(what, 0, "coefficient array does not match shape");
  for (std::size_t i = 0; i < shape[0]; ++i) {
    if (vals[i].size() != shape[1]) throw ParseError(what, 0, "coefficient array does not match shape");
    for (std::size_t jj = 0; jj < shape[1]; ++jj) {
      const auto ks = vals[i][jj].get<std::vector<double>>();
      if (ks.size() != shape[2]) throw ParseError(what, 0, "coefficient array does not match shape");
      for (std::size_t k = 0; k < shape[2]; ++k) layer.coeff(i, jj, k) = ks[k];
    }
  }
  return layer;
}

TrainConfig config_from_json(const json& j) {
  TrainConfig c;
  c.model = parse_model_kind(j.at("model").get<std::string>());
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.weight_decay = j.at("weight_decay").get<double>();
  c.dropout = j.at("dropout").get<double>();
  c.grid_size = j.at("grid_size").get<std::size_t>();
  c.tau = j.at("tau").get<double>();
  c.epochs_max = j.at("epochs_max").get<std::size_t>();
  c.early_stop_patience = j.at("early_stop_patience").get<std::size_t>();
  c.scheduler_patience = j.at("scheduler_patience").get<std::size_t>();
  c.scheduler_factor = j.at("scheduler_factor").get<double>();
  c.min_lr = j.at("min_lr").get<double>();
  c.improvement_delta = j.at("improvement_delta").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.folds = j.at("folds").get<std::size_t>();
  return c;
}

json config_json(const TrainConfig& c) {
  return {{"model", to_string(c.model)},
          {"batch_size", c.batch_size},
          {"lr", c.lr},
          {"weight_decay", c.weight_decay},
          {"dropout", c.dropout},
          {"grid_size", c.grid_size},
          {"tau", c.tau},
          {"epochs_max", c.epochs_max},
          {"early_stop_patience", c.early_stop_patience},
          {"scheduler_patience", c.scheduler_patience},
          {"scheduler_factor", c.scheduler_factor},
          {"min_lr", c.min_lr},
          {"improvement_delta", c.improvement_delta},
          {"seed", c.seed},
          {"folds", c.folds}};
}

json report_json(const EvalReport& r) {
  return {{"tp", r.counts.tp},
          {"tn", r.counts.tn},
          {"fp", r.counts.fp},
          {"fn", r.counts.fn},
          {"subjects", r.counts.total()},
          {"accuracy", r.accuracy},
          {"auc_roc", r.auc_roc},
          {"precision", r.precision},
          {"recall", r.recall},
          {"f1", r.f1},
          {"degenerate_precision_recall", r.degenerate_precision_recall}};
}

json mean_std_json(const MeanStd& m) { return {{"mean", m.mean}, {"std", m.std}}; }

json aggregate_json(const AggregateReport& a) {
  return {{"folds", a.folds},
          {"accuracy", mean_std_json(a.accuracy)},
          {"auc_roc", mean_std_json(a.auc_roc)},
          {"precision", mean_std_json(a.precision)},
          {"recall", mean_std_json(a.recall)},
          {"f1", mean_std_json(a.f1)},
          {"table",
           {{"accuracy", format_percent(a.accuracy)},
            {"auc_roc", format_percent(a.auc_roc)},
            {"f1", format_decimal(a.f1)}}}};
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw NumericError("cannot format real");
  return std::string(buf, ptr);
}

std::string cohort_to_csv(const GroupedCohort& c) {
  std::string out = "subject_id,label";
  for (const auto& n : c.roi_names) out += "," + n;
  out += "\n";
  for (std::size_t s = 0; s < c.subject_ids.size(); ++s) {
    out += c.subject_ids[s] + "," + c.groups[s];
    for (double v : c.features.row(s)) out += "," + format_real(v);
    out += "\n";
  }
  return out;
}

GroupedCohort parse_cohort_csv(const std::string& text, const std::string& source) {
  const auto lines = lines_of(text);
  if (lines.empty()) throw ParseError(source, 1, "empty cohort file");
  const auto header = split(lines[0], ',');
  if (header.size() < 4 || header[0] != "subject_id" || header[1] != "label") {
    throw ParseError(source, 1,
                     "header must be subject_id,label followed by at least two ROI names");
  }
  GroupedCohort c;
  c.roi_names.assign(header.begin() + 2, header.end());
  const std::size_t n_roi = c.roi_names.size();
  std::set<std::string> seen_ids;
  std::vector<double> values;
  for (std::size_t ln = 1; ln < lines.size(); ++ln) {
    if (lines[ln].empty()) continue;
    const auto fields = split(lines[ln], ',');
    if (fields.size() != n_roi + 2) {
      throw ParseError(source, ln + 1,
                       "expected " + std::to_string(n_roi + 2) + " fields, got " +
                           std::to_string(fields.size()));
    }
    if (fields[0].empty() || !seen_ids.insert(fields[0]).second) {
      throw ParseError(source, ln + 1, "missing or duplicate subject id '" + fields[0] + "'");
    }
    if (fields[1].empty()) throw ParseError(source, ln + 1, "missing label");
    c.subject_ids.push_back(fields[0]);
    c.groups.push_back(fields[1]);
    for (std::size_t f = 2; f < fields.size(); ++f) {
      double v = 0.0;
      if (!parse_real(fields[f], v)) {
        throw ParseError(source, ln + 1,
                         "bad value '" + fields[f] + "' for ROI " + c.roi_names[f - 2]);
      }
      values.push_back(v);
    }
  }
  if (c.subject_ids.empty()) throw ParseError(source, 2, "cohort file has no subjects");
  c.features = Matrix(c.subject_ids.size(), n_roi, std::move(values));
  return c;
}

void write_cohort(const std::filesystem::path& path, const GroupedCohort& cohort) {
  write_file(path, cohort_to_csv(cohort));
}

GroupedCohort read_cohort(const std::filesystem::path& path) {
  return parse_cohort_csv(read_file(path), path.string());
}

CohortTable select_task(const GroupedCohort& cohort, const std::string& negative,
                        const std::string& positive) {
  if (negative == positive) throw ConfigError("task needs two distinct labels");
  CohortTable t;
  t.roi_names = cohort.roi_names;
  std::vector<std::size_t> rows;
  for (std::size_t s = 0; s < cohort.subject_ids.size(); ++s) {
    if (cohort.groups[s] == negative || cohort.groups[s] == positive) rows.push_back(s);
  }
  t.features = Matrix(rows.size(), cohort.features.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    t.subject_ids.push_back(cohort.subject_ids[rows[i]]);
    t.labels.push_back(cohort.groups[rows[i]] == positive ? 1 : 0);
    auto src = cohort.features.row(rows[i]);
    std::copy(src.begin(), src.end(), t.features.row(i).begin());
  }
  std::size_t pos = 0;
  for (int l : t.labels) pos += l;
  if (pos == 0 || pos == t.labels.size()) {
    throw ConfigError("task " + negative + ":" + positive + " selects " +
                      std::to_string(t.labels.size() - pos) + " " + negative + " and " +
                      std::to_string(pos) + " " + positive + " subjects; both must be present");
  }
  return t;
}

std::pair<std::string, std::string> parse_task(const std::string& text) {
  const auto parts = split(text, ':');
  if (parts.size() != 2 || parts[0].empty() || parts[1].empty()) {
    throw ConfigError("task must look like NEGATIVE:POSITIVE, got '" + text + "'");
  }
  return {parts[0], parts[1]};
}

std::string adjacency_to_csv(const Matrix& adjacency, const std::vector<std::string>& roi_names) {
  std::string out;
  for (std::size_t i = 0; i < roi_names.size(); ++i) out += (i ? "," : "") + roi_names[i];
  out += "\n";
  for (std::size_t r = 0; r < adjacency.rows(); ++r) {
    for (std::size_t c = 0; c < adjacency.cols(); ++c)
      out += (c ? "," : "") + format_real(adjacency(r, c));
    out += "\n";
  }
  return out;
}

void write_adjacency(const std::filesystem::path& csv_path, const RoiGraph& graph,
                     const std::vector<std::string>& roi_names, std::size_t subjects_used) {
  write_file(csv_path, adjacency_to_csv(graph.adjacency, roi_names));
  std::size_t edges = 0;
  for (std::size_t i = 0; i < graph.node_count(); ++i)
    for (std::size_t j = i + 1; j < graph.node_count(); ++j) edges += graph.adjacency(i, j) != 0.0;
  const json meta = {{"tau", graph.threshold_used},
                     {"threshold_rule", "|corr| > tau"},
                     {"n_roi", graph.node_count()},
                     {"undirected_edges", edges},
                     {"subjects_used", subjects_used},
                     {"adjacency_csv", csv_path.filename().string()}};
  auto meta_path = csv_path;
  meta_path.replace_extension(".meta.json");
  write_file(meta_path, meta.dump(2) + "\n");
}

std::string checkpoint_to_json(const Checkpoint& ckpt) {
  const ModelParams& p = ckpt.params;
  json params = json::array();
  for (const auto& t : p.tensors()) {
    json entry;
    if (t.name == "kan1.coeffs") {
      entry = kan_json(p.kan1);
    } else if (t.name == "kan2.coeffs") {
      entry = kan_json(p.kan2);
    } else {
      entry = matrix_json(*t.value);
    }
    entry["name"] = t.name;
    params.push_back(std::move(entry));
  }
  const json doc = {
      {"format", "gkan-checkpoint"},
      {"version", 1},
      {"model", to_string(p.kind)},
      {"seed", ckpt.config.seed},
      {"config", config_json(ckpt.config)},
      {"task", {{"negative", ckpt.task_negative}, {"positive", ckpt.task_positive}}},
      {"roi_names", ckpt.roi_names},
      {"model_shape",
       {{"in_features", p.shape.in_features},
        {"hidden", p.shape.hidden},
        {"classes", p.shape.classes},
        {"grid_size", p.shape.grid_size}}},
      {"adam_step", p.adam.step},
      {"graph", {{"tau", ckpt.graph.threshold_used}, {"adjacency", matrix_json(ckpt.graph.adjacency)}}},
      {"parameters", params}};
  return doc.dump(1) + "\n";
}

Checkpoint parse_checkpoint(const std::string& text, const std::string& source) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(source, 0, e.what());
  }
  try {
    if (doc.at("format") != "gkan-checkpoint") throw ParseError(source, 0, "not a gkan checkpoint");
    Checkpoint ck;
    ck.config = config_from_json(doc.at("config"));
    ck.task_negative = doc.at("task").at("negative").get<std::string>();
    ck.task_positive = doc.at("task").at("positive").get<std::string>();
    ck.roi_names = doc.at("roi_names").get<std::vector<std::string>>();
    ck.graph = graph_from_adjacency(matrix_from_json(doc.at("graph").at("adjacency"), source),
                                    doc.at("graph").at("tau").get<double>());

    ModelShape shape;
    const auto& js = doc.at("model_shape");
    shape.in_features = js.at("in_features").get<std::size_t>();
    shape.hidden = js.at("hidden").get<std::size_t>();
    shape.classes = js.at("classes").get<std::size_t>();
    shape.grid_size = js.at("grid_size").get<std::size_t>();
    ModelParams p = ModelParams::zeros(parse_model_kind(doc.at("model").get<std::string>()), shape);
    p.adam.step = doc.at("adam_step").get<std::uint64_t>();

    const auto& entries = doc.at("parameters");
    auto tensors = p.tensors();
    if (entries.size() != tensors.size()) {
      throw ParseError(source, 0, "expected " + std::to_string(tensors.size()) +
                                      " parameter arrays, found " + std::to_string(entries.size()));
    }
    for (std::size_t t = 0; t < tensors.size(); ++t) {
      const auto& e = entries[t];
      if (e.at("name") != tensors[t].name) {
        throw ParseError(source, 0, "parameter " + std::to_string(t) + " should be " + tensors[t].name);
      }
      if (tensors[t].name == "kan1.coeffs" || tensors[t].name == "kan2.coeffs") {
        KanLayer layer = kan_from_json(e, source);
        if (layer.coeffs.rows() != tensors[t].value->rows() ||
            layer.coeffs.cols() != tensors[t].value->cols()) {
          throw ParseError(source, 0, tensors[t].name + " shape does not match model shape");
        }
        (tensors[t].name == "kan1.coeffs" ? p.kan1 : p.kan2) = std::move(layer);
      } else {
        Matrix m = matrix_from_json(e, source);
        if (m.rows() != tensors[t].value->rows() || m.cols() != tensors[t].value->cols()) {
          throw ParseError(source, 0, tensors[t].name + " has shape " + m.shape_str() + ", expected " +
                                          tensors[t].value->shape_str());
        }
        *tensors[t].value = std::move(m);
      }
    }
    ck.params = std::move(p);
    if (ck.graph.node_count() != ck.roi_names.size()) {
      throw ParseError(source, 0, "graph size does not match ROI name count");
    }
    return ck;
  } catch (const json::exception& e) {
    throw ParseError(source, 0, std::string("malformed checkpoint: ") + e.what());
  }
}

void write_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  write_file(path, checkpoint_to_json(ckpt));
}

Checkpoint read_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(read_file(path), path.string());
}

std::string report_to_json(const EvalReport& report) { return report_json(report).dump(2) + "\n"; }

std::string per_subject_csv(const EvalReport& report) {
  std::string out = "subject_id,label,score,prediction\n";
  for (const auto& s : report.per_subject) {
    out += s.id + "," + std::to_string(s.label) + "," + format_real(s.score) + "," +
           std::to_string(s.prediction) + "\n";
  }
  return out;
}

std::string history_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,train_loss,val_loss,lr,train_accuracy\n";
  for (const auto& h : history) {
    out += std::to_string(h.epoch) + "," + format_real(h.train_loss) + "," +
           format_real(h.val_loss) + "," + format_real(h.lr) + "," +
           (std::isnan(h.train_accuracy) ? std::string() : format_real(h.train_accuracy)) + "\n";
  }
  return out;
}

std::string aggregate_table(const std::vector<std::pair<std::string, AggregateReport>>& rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof line, "%-10s %-16s %-16s %-12s\n", "Model", "Accuracy", "AUC-ROC",
                "F1-Score");
  out += line;
  for (const auto& [name, a] : rows) {
    std::snprintf(line, sizeof line, "%-10s %-16s %-16s %-12s\n", name.c_str(),
                  format_percent(a.accuracy).c_str(), format_percent(a.auc_roc).c_str(),
                  format_decimal(a.f1).c_str());
    out += line;
  }
  return out;
}

std::string cv_summary_json(const CvResult& cv, const TrainConfig& config) {
  json folds = json::array();
  for (const auto& f : cv.folds) {
    json entry = report_json(f.metrics);
    entry["fold"] = f.fold_index;
    entry["best_val_loss"] = f.best_val_loss;
    entry["best_epoch"] = f.best_epoch;
    entry["epochs_run"] = f.epochs_run;
    entry["train_subjects"] = f.train_ids.size();
    entry["val_subjects"] = f.val_ids.size();
    folds.push_back(std::move(entry));
  }
  const json doc = {{"model", to_string(config.model)},
                    {"config", config_json(config)},
                    {"folds", folds},
                    {"aggregate", aggregate_json(cv.aggregate)}};
  return doc.dump(2) + "\n";
}

std::string saliency_csv(const ImportanceReport& report, const std::vector<std::string>& roi_names) {
  std::string out = "roi_name,saliency,rank\n";
  for (std::size_t rank = 0; rank < report.ranking_index.size(); ++rank) {
    const std::size_t v = report.ranking_index[rank];
    out += roi_names[v] + "," + format_real(report.roi_scores[v]) + "," + std::to_string(rank + 1) +
           "\n";
  }
  return out;
}

std::string unit_scores_csv(const ImportanceReport& report) {
  std::string out = "layer,unit,score\n";
  for (std::size_t l = 0; l < report.unit_scores.size(); ++l)
    for (std::size_t i = 0; i < report.unit_scores[l].size(); ++i)
      out += "kan" + std::to_string(l + 1) + "," + std::to_string(i) + "," +
             format_real(report.unit_scores[l][i]) + "\n";
  return out;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write " + path.string());
  out << contents;
  if (!out) throw UsageError("failed writing " + path.string());
}

std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256 digest failed");
  }
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(hex[digest[i] >> 4]);
    out.push_back(hex[digest[i] & 0xf]);
  }
  return out;
}

std::string config_to_json(const TrainConfig& config) { return config_json(config).dump(2) + "\n"; }

}  // namespace gkan::io
