#include "cfsim/reporting.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "cfsim/errors.hpp"

namespace cfsim {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string format_real(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

double parse_similarity(const std::string& s) {
  if (s == "inf") return kInf;
  return std::stod(s);
}

void write_string(std::ofstream& out, const std::string& s) {
  const auto len = static_cast<std::uint32_t>(s.size());
  out.write(reinterpret_cast<const char*>(&len), sizeof(len));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::ifstream& in) {
  std::uint32_t len = 0;
  in.read(reinterpret_cast<char*>(&len), sizeof(len));
  std::string s(len, '\0');
  in.read(s.data(), static_cast<std::streamsize>(len));
  return s;
}

nlohmann::json metrics_to_json(const Metrics& m) {
  return {{"averaged_rank", m.averaged_rank},
          {"accuracy_pct", m.accuracy_pct},
          {"photo_count", m.photo_count},
          {"cmc", m.cmc}};
}

Metrics metrics_from_json(const nlohmann::json& j) {
  Metrics m;
  m.averaged_rank = j.at("averaged_rank").get<double>();
  m.accuracy_pct = j.at("accuracy_pct").get<double>();
  m.photo_count = j.at("photo_count").get<int>();
  m.cmc = j.at("cmc").get<std::vector<double>>();
  return m;
}

/// Numeric #Vis for chart ordering; geometric-visibility runs sort last.
int visibility_rank(const std::string& label) {
  if (label.empty() || !std::isdigit(static_cast<unsigned char>(label.front()))) return 1 << 20;
  return std::stoi(label);
}

}  // namespace

void save_matrix_csv(const ComparisonMatrix& matrix, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write matrix '" + path + "'");
  out << "photo_id,skull_id,similarity\n";
  for (std::size_t j = 0; j < matrix.cols(); ++j) {
    for (std::size_t i = 0; i < matrix.rows(); ++i) {
      out << matrix.photo_ids[j] << ',' << matrix.skull_ids[i] << ',' << format_real(matrix.at(i, j))
          << "\n";
    }
  }
  out.flush();
  if (!out) throw IoError("failed while writing matrix '" + path + "'");

  // Column metadata needed to reload the matrix (truth map, pose classes).
  nlohmann::json meta;
  meta["schema_version"] = 1;
  meta["photo_truth"] = matrix.photo_truth;
  std::vector<std::string> poses;
  poses.reserve(matrix.photo_pose.size());
  for (PoseClass p : matrix.photo_pose) poses.push_back(to_string(p));
  meta["photo_pose"] = poses;
  std::ofstream meta_out(path + ".meta.json");
  if (!meta_out) throw IoError("cannot write matrix sidecar for '" + path + "'");
  meta_out << meta.dump(2) << "\n";
}

ComparisonMatrix load_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open matrix '" + path + "'");
  std::string line;
  if (!std::getline(in, line) || line != "photo_id,skull_id,similarity") {
    throw SchemaError("matrix header mismatch in '" + path + "'");
  }
  ComparisonMatrix matrix;
  std::map<std::string, std::size_t> photo_index;
  std::map<std::string, std::size_t> skull_index;
  struct Cell {
    std::size_t photo, skull;
    double value;
  };
  std::vector<Cell> cells;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    std::string photo, skull, value;
    if (!std::getline(ls, photo, ',') || !std::getline(ls, skull, ',') ||
        !std::getline(ls, value)) {
      throw SchemaError("bad matrix row '" + line + "'");
    }
    const auto pit = photo_index.emplace(photo, photo_index.size());
    if (pit.second) matrix.photo_ids.push_back(photo);
    const auto sit = skull_index.emplace(skull, skull_index.size());
    if (sit.second) matrix.skull_ids.push_back(skull);
    cells.push_back({pit.first->second, sit.first->second, parse_similarity(value)});
  }
  matrix.scores.assign(matrix.rows() * matrix.cols(), kInf);
  for (const Cell& c : cells) matrix.scores[c.skull * matrix.cols() + c.photo] = c.value;

  matrix.photo_truth.assign(matrix.cols(), "");
  matrix.photo_pose.assign(matrix.cols(), PoseClass::kFrontal);
  std::ifstream meta_in(path + ".meta.json");
  if (meta_in) {
    const nlohmann::json meta = nlohmann::json::parse(meta_in);
    matrix.photo_truth = meta.at("photo_truth").get<std::vector<std::string>>();
    const auto poses = meta.at("photo_pose").get<std::vector<std::string>>();
    for (std::size_t j = 0; j < poses.size() && j < matrix.photo_pose.size(); ++j) {
      matrix.photo_pose[j] = pose_class_from_string(poses[j]);
    }
  }
  return matrix;
}

void save_matrix_binary(const ComparisonMatrix& matrix, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write matrix '" + path + "'");
  out.write("CFSM", 4);
  const std::uint32_t version = 1;
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  const std::uint64_t rows = matrix.rows(), cols = matrix.cols();
  out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
  out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
  for (const auto& s : matrix.skull_ids) write_string(out, s);
  for (const auto& s : matrix.photo_ids) write_string(out, s);
  for (const auto& s : matrix.photo_truth) write_string(out, s);
  for (PoseClass p : matrix.photo_pose) {
    const char c = p == PoseClass::kFrontal ? 'f' : 'l';
    out.write(&c, 1);
  }
  out.write(reinterpret_cast<const char*>(matrix.scores.data()),
            static_cast<std::streamsize>(matrix.scores.size() * sizeof(double)));
  out.flush();
  if (!out) throw IoError("failed while writing matrix '" + path + "'");
}

ComparisonMatrix load_matrix_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open matrix '" + path + "'");
  char magic[4];
  in.read(magic, 4);
  if (std::memcmp(magic, "CFSM", 4) != 0) throw SchemaError("bad matrix magic in '" + path + "'");
  std::uint32_t version = 0;
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  if (version != 1) throw SchemaError("unsupported matrix version");
  std::uint64_t rows = 0, cols = 0;
  in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
  in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
  ComparisonMatrix matrix;
  matrix.skull_ids.resize(rows);
  for (auto& s : matrix.skull_ids) s = read_string(in);
  matrix.photo_ids.resize(cols);
  for (auto& s : matrix.photo_ids) s = read_string(in);
  matrix.photo_truth.resize(cols);
  for (auto& s : matrix.photo_truth) s = read_string(in);
  matrix.photo_pose.resize(cols);
  for (auto& p : matrix.photo_pose) {
    char c = 0;
    in.read(&c, 1);
    p = c == 'f' ? PoseClass::kFrontal : PoseClass::kLateral;
  }
  matrix.scores.resize(rows * cols);
  in.read(reinterpret_cast<char*>(matrix.scores.data()),
          static_cast<std::streamsize>(matrix.scores.size() * sizeof(double)));
  if (!in) throw SchemaError("truncated matrix file '" + path + "'");
  return matrix;
}

nlohmann::json report_to_json(const ExperimentReport& report) {
  nlohmann::json j;
  j["schema_version"] = 1;
  j["experiment"] = report.experiment_id;
  j["landmark_count"] = report.landmark_count;
  j["subject_count"] = report.subject_count;
  j["photo_count"] = report.photo_count;
  j["total_sfo"] = report.total_sfo;
  j["fstt"] = report.fstt_label;
  j["direction"] = report.direction_label;
  j["visibility"] = report.visibility_label;
  j["noise_px"] = report.noise_px;
  j["seed"] = report.seed;
  j["overall"] = metrics_to_json(report.overall);
  auto& conditions = j["conditions"];
  conditions = nlohmann::json::array();
  for (const auto& c : report.per_condition) {
    conditions.push_back({{"name", c.name}, {"metrics", metrics_to_json(c.metrics)}});
  }
  j["solver_failures"] = report.solver_failures;
  j["rejected_subjects"] = report.rejected_subjects;
  return j;
}

ExperimentReport report_from_json(const nlohmann::json& j) {
  ExperimentReport report;
  report.experiment_id = j.at("experiment").get<std::string>();
  report.landmark_count = j.at("landmark_count").get<int>();
  report.subject_count = j.at("subject_count").get<int>();
  report.photo_count = j.at("photo_count").get<int>();
  report.total_sfo = j.at("total_sfo").get<long long>();
  report.fstt_label = j.at("fstt").get<std::string>();
  report.direction_label = j.at("direction").get<std::string>();
  report.visibility_label = j.at("visibility").get<std::string>();
  report.noise_px = j.at("noise_px").get<double>();
  report.seed = j.at("seed").get<std::uint64_t>();
  report.overall = metrics_from_json(j.at("overall"));
  for (const auto& c : j.at("conditions")) {
    report.per_condition.push_back(
        {c.at("name").get<std::string>(), metrics_from_json(c.at("metrics"))});
  }
  report.solver_failures = j.at("solver_failures").get<int>();
  report.rejected_subjects = j.at("rejected_subjects").get<int>();
  return report;
}

void save_report_json(const ExperimentReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write report '" + path + "'");
  out << report_to_json(report).dump(2) << "\n";
}

ExperimentReport load_report_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open report '" + path + "'");
  try {
    return report_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError("report '" + path + "': " + e.what());
  }
}

std::string report_table(const std::vector<ExperimentReport>& reports) {
  std::ostringstream os;
  char row[256];
  std::snprintf(row, sizeof(row), "%-5s %6s %6s %9s %6s %9s %6s %6s %14s %8s\n", "Exp", "#Land",
                "#Sbj", "#SFO", "FSTT", "#Vis", "Dir", "Noise", "Averaged Rank", "Acc (%)");
  os << row;
  os << std::string(84, '-') << "\n";
  for (const auto& r : reports) {
    std::snprintf(row, sizeof(row), "%-5s %6d %6d %9lld %6s %9s %6s %6g %14.2f %8.1f\n",
                  r.experiment_id.c_str(), r.landmark_count, r.subject_count, r.total_sfo,
                  r.fstt_label.c_str(), r.visibility_label.c_str(), r.direction_label.c_str(),
                  r.noise_px, r.overall.averaged_rank, r.overall.accuracy_pct);
    os << row;
  }
  return os.str();
}

void save_cmc_csv(const std::vector<ExperimentReport>& reports, const std::string& path) {
  if (reports.empty()) throw InvalidSpec("no reports for CMC output");
  std::ofstream out(path);
  if (!out) throw IoError("cannot write CMC '" + path + "'");
  out << "rank";
  for (const auto& r : reports) {
    out << ',' << r.experiment_id << '_' << r.visibility_label << '_' << r.direction_label << '_'
        << "n" << r.noise_px;
  }
  out << "\n";
  std::size_t max_rank = 0;
  for (const auto& r : reports) max_rank = std::max(max_rank, r.overall.cmc.size());
  for (std::size_t rank = 1; rank <= max_rank; ++rank) {
    out << rank;
    for (const auto& r : reports) {
      const auto& cmc = r.overall.cmc;
      const double v = rank <= cmc.size() ? cmc[rank - 1] : 1.0;
      out << ',' << format_real(v);
    }
    out << "\n";
  }
}

std::string svg_accuracy_chart(const std::vector<ExperimentReport>& reports) {
  if (reports.empty()) throw InvalidSpec("no reports for chart output");

  // Bar groups: #Vis ascending. Series within a group: (direction, noise).
  std::vector<std::string> groups;
  for (const auto& r : reports) {
    if (std::find(groups.begin(), groups.end(), r.visibility_label) == groups.end()) {
      groups.push_back(r.visibility_label);
    }
  }
  std::sort(groups.begin(), groups.end(), [](const std::string& a, const std::string& b) {
    return visibility_rank(a) != visibility_rank(b) ? visibility_rank(a) < visibility_rank(b)
                                                    : a < b;
  });
  std::vector<std::string> series;
  const auto series_name = [](const ExperimentReport& r) {
    std::ostringstream os;
    os << r.direction_label << " dir, noise " << r.noise_px;
    return os.str();
  };
  for (const auto& r : reports) {
    const std::string name = series_name(r);
    if (std::find(series.begin(), series.end(), name) == series.end()) series.push_back(name);
  }

  const double width = 720.0, height = 420.0;
  const double left = 60.0, bottom = 370.0, top = 40.0;
  const double plot_w = width - left - 30.0, plot_h = bottom - top;
  const double group_w = plot_w / static_cast<double>(groups.size());
  const double bar_w = group_w * 0.8 / static_cast<double>(series.size());
  const std::vector<std::string> palette = {"#4C78A8", "#F58518", "#54A24B", "#E45756",
                                            "#72B7B2", "#B279A2"};

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<text x=\"" << width / 2 << "\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">"
      << "Accuracy by visible landmarks</text>\n";
  // Axes and gridlines.
  for (int pct = 0; pct <= 100; pct += 20) {
    const double y = bottom - plot_h * pct / 100.0;
    svg << "<line x1=\"" << left << "\" y1=\"" << y << "\" x2=\"" << left + plot_w << "\" y2=\""
        << y << "\" stroke=\"#DDDDDD\"/>\n";
    svg << "<text x=\"" << left - 8 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << pct << "</text>\n";
  }
  svg << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << left + plot_w
      << "\" y2=\"" << bottom << "\" stroke=\"#333333\"/>\n";

  for (std::size_t gi = 0; gi < groups.size(); ++gi) {
    const double gx = left + group_w * (static_cast<double>(gi) + 0.1);
    svg << "<g class=\"kgroup\" data-k=\"" << groups[gi] << "\">\n";
    for (std::size_t si = 0; si < series.size(); ++si) {
      const ExperimentReport* found = nullptr;
      for (const auto& r : reports) {
        if (r.visibility_label == groups[gi] && series_name(r) == series[si]) {
          found = &r;
          break;
        }
      }
      if (!found) continue;
      const double value = found->overall.accuracy_pct;
      const double bar_h = plot_h * value / 100.0;
      const double x = gx + bar_w * static_cast<double>(si);
      svg << "  <rect x=\"" << x << "\" y=\"" << bottom - bar_h << "\" width=\"" << bar_w * 0.92
          << "\" height=\"" << bar_h << "\" fill=\"" << palette[si % palette.size()] << "\"/>\n";
      char label[32];
      std::snprintf(label, sizeof(label), "%.0f", value);
      svg << "  <text x=\"" << x + bar_w * 0.46 << "\" y=\"" << bottom - bar_h - 4
          << "\" text-anchor=\"middle\" font-size=\"10\">" << label << "</text>\n";
    }
    svg << "  <text x=\"" << left + group_w * (static_cast<double>(gi) + 0.5) << "\" y=\""
        << bottom + 18 << "\" text-anchor=\"middle\" font-size=\"12\">" << groups[gi]
        << "</text>\n";
    svg << "</g>\n";
  }
  // Legend.
  for (std::size_t si = 0; si < series.size(); ++si) {
    const double y = top + 16.0 * static_cast<double>(si);
    svg << "<rect x=\"" << left + plot_w - 150 << "\" y=\"" << y - 9
        << "\" width=\"10\" height=\"10\" fill=\"" << palette[si % palette.size()] << "\"/>\n";
    svg << "<text x=\"" << left + plot_w - 136 << "\" y=\"" << y << "\" font-size=\"11\">"
        << series[si] << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace cfsim
