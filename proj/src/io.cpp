#include "dedpo/io.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace dedpo {

static_assert(std::endian::native == std::endian::little,
              "parameter files assume a little-endian host");

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

namespace {

std::ofstream open_out(const std::string& path, bool binary = false) {
  std::ofstream f(path, binary ? std::ios::binary : std::ios::out);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  return f;
}

std::ifstream open_in(const std::string& path, bool binary = false) {
  std::ifstream f(path, binary ? std::ios::binary : std::ios::in);
  if (!f) throw std::runtime_error("cannot open for reading: " + path);
  return f;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::stringstream ss(line);
  while (std::getline(ss, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s, const std::string& what, int lineno) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("line " + std::to_string(lineno) + ": bad " +
                             what + " value '" + s + "'");
  }
}

long long parse_int(const std::string& s, const std::string& what, int lineno) {
  try {
    std::size_t used = 0;
    const long long v = std::stoll(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw std::runtime_error("line " + std::to_string(lineno) + ": bad " +
                             what + " value '" + s + "'");
  }
}

void write_triplet_row(std::ofstream& f, const PreferenceTriplet& y,
                       bool labeled) {
  f << y.id << ',' << y.c;
  for (Eigen::Index i = 0; i < y.x0.size(); ++i)
    f << ',' << format_double(y.x0[i]);
  for (Eigen::Index i = 0; i < y.x1.size(); ++i)
    f << ',' << format_double(y.x1[i]);
  f << ',' << (labeled ? 1 : 0) << ',';
  if (labeled) f << *y.z;
  f << '\n';
}

constexpr char kParamsMagic[9] = {'D', 'E', 'D', 'P', 'O', '-', 'N', 'E', 'T'};
constexpr std::uint8_t kParamsVersion = 1;

}  // namespace

void write_dataset_csv(const std::string& path, const Dataset& d) {
  int dim = 0;
  if (d.n() > 0)
    dim = static_cast<int>(
        (d.n_l() > 0 ? d.labeled.front() : d.unlabeled.front()).x0.size());
  std::ofstream f = open_out(path);
  f << "id,c";
  for (int i = 0; i < dim; ++i) f << ",x0_" << i;
  for (int i = 0; i < dim; ++i) f << ",x1_" << i;
  f << ",r,z\n";
  // Rows in id order across both groups, so output is independent of how the
  // pairs are partitioned in memory.
  std::size_t il = 0, iu = 0;
  while (il < d.labeled.size() || iu < d.unlabeled.size()) {
    const bool take_labeled =
        iu >= d.unlabeled.size() ||
        (il < d.labeled.size() && d.labeled[il].id < d.unlabeled[iu].id);
    if (take_labeled) {
      write_triplet_row(f, d.labeled[il++], true);
    } else {
      write_triplet_row(f, d.unlabeled[iu++], false);
    }
  }
}

Dataset read_dataset_csv(const std::string& path) {
  std::ifstream f = open_in(path);
  std::string line;
  if (!std::getline(f, line))
    throw std::runtime_error(path + ": empty dataset file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_line(line);
  if (header.size() < 6 || header[0] != "id" || header[1] != "c" ||
      header[header.size() - 2] != "r" || header.back() != "z")
    throw std::runtime_error(path + ": unrecognized dataset header");
  const int dim = static_cast<int>((header.size() - 4) / 2);
  if (header.size() != static_cast<std::size_t>(4 + 2 * dim))
    throw std::runtime_error(path + ": inconsistent dataset header");
  for (int i = 0; i < dim; ++i) {
    if (header[2 + i] != "x0_" + std::to_string(i) ||
        header[2 + dim + i] != "x1_" + std::to_string(i))
      throw std::runtime_error(path + ": unrecognized dataset header");
  }

  Dataset d;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const std::vector<std::string> v = split_csv_line(line);
    if (v.size() != header.size())
      throw std::runtime_error("line " + std::to_string(lineno) +
                               ": wrong field count");
    const std::int64_t id = parse_int(v[0], "id", lineno);
    const int c = static_cast<int>(parse_int(v[1], "condition", lineno));
    Vec x0(dim), x1(dim);
    for (int i = 0; i < dim; ++i) {
      x0[i] = parse_double(v[2 + i], "coordinate", lineno);
      x1[i] = parse_double(v[2 + dim + i], "coordinate", lineno);
    }
    const long long r = parse_int(v[2 + 2 * dim], "labeling indicator", lineno);
    if (r != 0 && r != 1)
      throw std::runtime_error("line " + std::to_string(lineno) +
                               ": labeling indicator outside {0, 1}");
    const std::string& zs = v.back();
    if (r == 1) {
      if (zs.empty())
        throw std::runtime_error("line " + std::to_string(lineno) +
                                 ": labeled row without label");
      const long long z = parse_int(zs, "label", lineno);
      if (z != 0 && z != 1)
        throw std::runtime_error("line " + std::to_string(lineno) +
                                 ": label outside {0, 1}");
      d.labeled.push_back(
          make_triplet(id, c, std::move(x0), std::move(x1), static_cast<int>(z)));
    } else {
      if (!zs.empty())
        throw std::runtime_error("line " + std::to_string(lineno) +
                                 ": unlabeled row carries a label");
      d.unlabeled.push_back(make_triplet(id, c, std::move(x0), std::move(x1)));
    }
  }
  return d;
}

void save_params(const std::string& path, const ToyDenoiser& model, int T) {
  if (model.spec().data_dim > 255)
    throw std::invalid_argument("save_params: data dimension exceeds header");
  if (T < 0 || T > 65535)
    throw std::invalid_argument("save_params: timestep count exceeds header");
  std::ofstream f = open_out(path, true);
  char header[16] = {};
  std::memcpy(header, kParamsMagic, sizeof(kParamsMagic));
  header[9] = static_cast<char>(kParamsVersion);
  header[10] = static_cast<char>(model.spec().data_dim);
  header[11] = static_cast<char>(T & 0xff);
  header[12] = static_cast<char>((T >> 8) & 0xff);
  f.write(header, sizeof(header));
  const Vec& th = model.params();
  f.write(reinterpret_cast<const char*>(th.data()),
          static_cast<std::streamsize>(th.size() * sizeof(double)));
}

LoadedParams load_params(const std::string& path) {
  std::ifstream f = open_in(path, true);
  char header[16];
  if (!f.read(header, sizeof(header)))
    throw std::runtime_error(path + ": truncated parameter header");
  if (std::memcmp(header, kParamsMagic, sizeof(kParamsMagic)) != 0)
    throw std::runtime_error(path + ": not a parameter file");
  if (static_cast<std::uint8_t>(header[9]) != kParamsVersion)
    throw std::runtime_error(path + ": unsupported parameter format version");
  LoadedParams out;
  out.data_dim = static_cast<std::uint8_t>(header[10]);
  out.T = static_cast<std::uint8_t>(header[11]) |
          (static_cast<std::uint8_t>(header[12]) << 8);
  std::vector<char> rest((std::istreambuf_iterator<char>(f)),
                         std::istreambuf_iterator<char>());
  if (rest.size() % sizeof(double) != 0)
    throw std::runtime_error(path + ": parameter payload is not doubles");
  out.theta.resize(static_cast<Eigen::Index>(rest.size() / sizeof(double)));
  std::memcpy(out.theta.data(), rest.data(), rest.size());
  return out;
}

std::unordered_map<std::int64_t, double> read_fixed_table(
    const std::string& path) {
  std::ifstream f = open_in(path);
  std::unordered_map<std::int64_t, double> table;
  std::string line;
  int lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ss(line);
    std::int64_t id;
    double score;
    if (!(ss >> id))
      throw std::runtime_error("line " + std::to_string(lineno) + ": bad id");
    if (!(ss >> score))
      throw std::runtime_error("line " + std::to_string(lineno) +
                               ": missing score");
    if (!(score >= 0.0 && score <= 1.0))
      throw std::runtime_error("line " + std::to_string(lineno) +
                               ": score outside [0, 1]");
    std::string extra;
    if (ss >> extra)
      throw std::runtime_error("line " + std::to_string(lineno) +
                               ": trailing content '" + extra + "'");
    if (!table.emplace(id, score).second)
      throw std::runtime_error("line " + std::to_string(lineno) +
                               ": duplicate id " + std::to_string(id));
  }
  return table;
}

Json run_report_json(const RunReport& r) {
  Json j;
  j["estimator"] = r.estimator;
  j["annotator"] = r.annotator;
  j["final_loss"] = r.final_loss;
  j["loss_trace"] = r.loss_trace;
  j["win_rate"] = r.win_rate;
  if (r.param_error) {
    j["param_error"] = *r.param_error;
  } else {
    j["param_error"] = nullptr;
  }
  j["assumption_flags"] = r.assumption_flags;
  j["wall_time_s"] = r.wall_time_s;
  return j;
}

void write_json(const std::string& path, const Json& j) {
  std::ofstream f = open_out(path);
  f << j.dump(2) << '\n';
}

Json read_json(const std::string& path) {
  std::ifstream f = open_in(path);
  return Json::parse(f);
}

void write_trace_csv(const std::string& path,
                     const std::vector<double>& trace) {
  std::ofstream f = open_out(path);
  f << "step,loss\n";
  for (std::size_t i = 0; i < trace.size(); ++i)
    f << i << ',' << format_double(trace[i]) << '\n';
}

void write_sweep_csv(const std::string& path,
                     const std::vector<SweepRow>& rows) {
  std::ofstream f = open_out(path);
  f << "estimator,annotator,accuracy,n_l,n_u,seed,win_rate,param_error,status\n";
  for (const SweepRow& r : rows) {
    f << r.estimator << ',' << r.annotator << ',' << format_double(r.accuracy)
      << ',' << r.n_l << ',' << r.n_u << ',' << r.seed << ','
      << format_double(r.win_rate) << ',';
    if (r.param_error) f << format_double(*r.param_error);
    f << ',' << r.status << '\n';
  }
}

namespace {

std::string svg_num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

const char* kSeriesColors[] = {"#1f77b4", "#d62728", "#2ca02c",
                               "#9467bd", "#ff7f0e", "#8c564b"};

}  // namespace

void write_line_svg(const std::string& path, const std::string& title,
                    const std::string& x_label, const std::string& y_label,
                    const std::vector<SvgSeries>& series) {
  const double W = 640, H = 480;
  const double L = 70, R = 20, Tm = 40, B = 50;
  double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
  for (const SvgSeries& s : series) {
    for (const auto& [x, y] : s.points) {
      xmin = std::min(xmin, x);
      xmax = std::max(xmax, x);
      ymin = std::min(ymin, y);
      ymax = std::max(ymax, y);
    }
  }
  if (xmin > xmax) {
    xmin = 0;
    xmax = 1;
    ymin = 0;
    ymax = 1;
  }
  if (xmax == xmin) xmax = xmin + 1;
  if (ymax == ymin) ymax = ymin + 1;
  const double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double x) {
    return L + (x - xmin) / (xmax - xmin) * (W - L - R);
  };
  auto py = [&](double y) {
    return H - B - (y - ymin) / (ymax - ymin) * (H - Tm - B);
  };

  std::ofstream f = open_out(path);
  f << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W
    << "\" height=\"" << H << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  f << "<rect width=\"" << W << "\" height=\"" << H << "\" fill=\"white\"/>\n";
  f << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" "
       "font-family=\"sans-serif\" font-size=\"16\">"
    << title << "</text>\n";
  f << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R
    << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  f << "<line x1=\"" << L << "\" y1=\"" << Tm << "\" x2=\"" << L << "\" y2=\""
    << H - B << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double xv = xmin + (xmax - xmin) * i / 4.0;
    const double yv = ymin + (ymax - ymin) * i / 4.0;
    f << "<text x=\"" << svg_num(px(xv)) << "\" y=\"" << H - B + 18
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"11\">"
      << svg_num(xv) << "</text>\n";
    f << "<text x=\"" << L - 8 << "\" y=\"" << svg_num(py(yv) + 4)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"11\">"
      << svg_num(yv) << "</text>\n";
  }
  f << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\">"
    << x_label << "</text>\n";
  f << "<text x=\"18\" y=\"" << (Tm + H - B) / 2
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"13\" "
       "transform=\"rotate(-90 18 "
    << (Tm + H - B) / 2 << ")\">" << y_label << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const char* color = kSeriesColors[si % 6];
    f << "<polyline fill=\"none\" stroke=\"" << color
      << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : series[si].points)
      f << svg_num(px(x)) << ',' << svg_num(py(y)) << ' ';
    f << "\"/>\n";
    for (const auto& [x, y] : series[si].points)
      f << "<circle cx=\"" << svg_num(px(x)) << "\" cy=\"" << svg_num(py(y))
        << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    f << "<text x=\"" << W - R - 10 << "\" y=\"" << Tm + 16 + 16 * si
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"12\" "
         "fill=\""
      << color << "\">" << series[si].label << "</text>\n";
  }
  f << "</svg>\n";
}

}  // namespace dedpo
