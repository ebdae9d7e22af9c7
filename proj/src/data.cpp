#include "mreal/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "mreal/error.hpp"

namespace mreal {

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string_view strip_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

bool parse_double(std::string_view s, double& v) {
  while (!s.empty() && s.front() == ' ') s.remove_prefix(1);
  while (!s.empty() && s.back() == ' ') s.remove_suffix(1);
  if (s.empty()) return false;
  if (s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::string column_name(int appliance, int t) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "a%d_t%03d", appliance, t);
  return buf;
}

}  // namespace

std::string to_string(DayType d) {
  switch (d) {
    case DayType::weekday: return "weekday";
    case DayType::weekend: return "weekend";
    case DayType::unknown: return "unknown";
  }
  return "unknown";
}

DayType parse_day_type(const std::string& s) {
  if (s == "weekday") return DayType::weekday;
  if (s == "weekend") return DayType::weekend;
  if (s == "unknown" || s.empty()) return DayType::unknown;
  throw Error("unknown day_type '" + s + "'");
}

std::string format_value(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6f", v);
  std::string s(buf);
  const auto dot = s.find('.');
  if (dot != std::string::npos) {
    while (s.back() == '0') s.pop_back();
    if (s.back() == '.') s.pop_back();
  }
  if (s == "-0") s = "0";
  return s;
}

LoadDataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw IngestError("missing header row", 1);
  const auto header = split_commas(strip_cr(line));
  if (header.size() < 3 || header[0] != "sample_id" || header[1] != "day_type")
    throw IngestError("header must start with sample_id,day_type", 1);

  // Infer appliance count and day length from the column names.
  const std::size_t value_cols = header.size() - 2;
  int n_app = 0;
  for (std::size_t i = 2; i < header.size(); ++i) {
    if (header[i].substr(0, 1) != "a") throw IngestError("bad column name '" + std::string(header[i]) + "'", 1);
    n_app = std::max(n_app, std::atoi(std::string(header[i].substr(1)).c_str()) + 1);
  }
  if (n_app < 1 || value_cols % n_app != 0) throw IngestError("inconsistent appliance columns", 1);
  const int steps = static_cast<int>(value_cols / n_app);
  for (int j = 0; j < n_app; ++j)
    for (int t = 0; t < steps; ++t)
      if (header[2 + static_cast<std::size_t>(j) * steps + t] != column_name(j, t))
        throw IngestError("expected column " + column_name(j, t), 1);

  LoadDataset ds;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const auto row_view = strip_cr(line);
    if (row_view.empty()) continue;
    const auto cells = split_commas(row_view);
    if (cells.size() != header.size())
      throw IngestError("expected " + std::to_string(header.size()) + " columns, found " +
                            std::to_string(cells.size()),
                        line_no);
    LoadDay day(std::string(cells[0]), n_app, steps);
    try {
      day.day_type = parse_day_type(std::string(cells[1]));
    } catch (const Error& e) {
      throw IngestError(e.what(), line_no);
    }
    for (std::size_t i = 0; i < value_cols; ++i) {
      double v = 0.0;
      if (!parse_double(cells[2 + i], v)) throw IngestError("malformed value '" + std::string(cells[2 + i]) + "'", line_no);
      if (!std::isfinite(v)) throw IngestError("non-finite load", line_no);
      if (v < 0.0) throw IngestError("negative load", line_no);
      day.values[i] = v;
    }
    ds.samples.push_back(std::move(day));
  }
  return ds;
}

LoadDataset ingest_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open dataset file " + path.string());
  return read_csv(in);
}

void write_csv(const LoadDataset& ds, std::ostream& out) {
  const int n_app = ds.n_app();
  const int steps = ds.steps();
  out << "sample_id,day_type";
  for (int j = 0; j < n_app; ++j)
    for (int t = 0; t < steps; ++t) out << ',' << column_name(j, t);
  out << '\n';
  std::string row;
  for (const auto& day : ds.samples) {
    row.clear();
    row += day.sample_id;
    row += ',';
    row += to_string(day.day_type);
    for (double v : day.values) {
      row += ',';
      row += format_value(v);
    }
    row += '\n';
    out << row;
  }
}

void write_csv(const LoadDataset& ds, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write dataset file " + path.string());
  write_csv(ds, out);
  if (!out) throw Error("write failed for " + path.string());
}

void validate(const LoadDataset& ds) {
  if (ds.samples.empty()) return;
  const int n_app = ds.n_app();
  const int steps = ds.steps();
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& day = ds.samples[i];
    if (day.n_app != n_app || day.steps != steps ||
        day.values.size() != static_cast<std::size_t>(n_app) * steps)
      throw Error("sample " + std::to_string(i) + " has inconsistent shape");
    for (double v : day.values) {
      if (!std::isfinite(v)) throw Error("sample " + std::to_string(i) + " holds a non-finite value");
      if (!ds.normalized && v < 0.0) throw Error("sample " + std::to_string(i) + " holds a negative load");
    }
  }
}

NormStats compute_stats(const LoadDataset& ds, NormScheme scheme) {
  if (ds.samples.empty()) throw Error("cannot compute statistics of an empty dataset");
  if (ds.normalized) throw Error("statistics must be computed on raw data");
  const int n_app = ds.n_app();
  const int steps = ds.steps();
  const double count = static_cast<double>(ds.samples.size()) * steps;
  NormStats stats;
  stats.scheme = scheme;
  stats.sigma.resize(n_app);
  stats.min.assign(n_app, 0.0);
  stats.max.assign(n_app, 0.0);
  for (int j = 0; j < n_app; ++j) {
    double sum = 0.0;
    double lo = ds.samples.front().at(j, 0);
    double hi = lo;
    for (const auto& day : ds.samples) {
      const double* ch = day.channel(j);
      for (int t = 0; t < steps; ++t) {
        sum += ch[t];
        lo = std::min(lo, ch[t]);
        hi = std::max(hi, ch[t]);
      }
    }
    const double mean = sum / count;
    double sq = 0.0;
    for (const auto& day : ds.samples) {
      const double* ch = day.channel(j);
      for (int t = 0; t < steps; ++t) sq += (ch[t] - mean) * (ch[t] - mean);
    }
    stats.sigma[j] = std::sqrt(sq / count);
    stats.min[j] = lo;
    stats.max[j] = hi;
  }
  return stats;
}

LoadDataset normalize(const LoadDataset& ds, const NormStats& stats) {
  if (ds.normalized) throw Error("dataset is already normalized");
  const int n_app = ds.n_app();
  if (static_cast<int>(stats.sigma.size()) != n_app) throw Error("statistics do not match appliance count");
  LoadDataset out = ds;
  out.stats = stats;
  out.normalized = true;
  for (int j = 0; j < n_app; ++j) {
    if (stats.scheme == NormScheme::six_sigma) {
      const double sigma = stats.sigma[j];
      if (sigma == 0.0) {
        for (const auto& day : ds.samples)
          for (int t = 0; t < ds.steps(); ++t)
            if (day.at(j, t) != 0.0)
              throw Error("appliance " + std::to_string(j) + " has zero sigma but nonzero load");
        continue;  // all-zero column passes through
      }
      const double scale = 6.0 * sigma;
      for (auto& day : out.samples) {
        double* ch = day.channel(j);
        for (int t = 0; t < day.steps; ++t) ch[t] /= scale;
      }
    } else {
      const double lo = stats.min[j];
      const double range = stats.max[j] - stats.min[j];
      for (auto& day : out.samples) {
        double* ch = day.channel(j);
        for (int t = 0; t < day.steps; ++t) ch[t] = range > 0.0 ? 2.0 * (ch[t] - lo) / range - 1.0 : -1.0;
      }
    }
  }
  return out;
}

LoadDataset denormalize(const LoadDataset& ds) {
  if (!ds.normalized) throw Error("dataset is not normalized");
  const int n_app = ds.n_app();
  if (static_cast<int>(ds.stats.sigma.size()) != n_app) throw Error("dataset carries no normalization statistics");
  LoadDataset out = ds;
  out.normalized = false;
  for (int j = 0; j < n_app; ++j) {
    for (auto& day : out.samples) {
      double* ch = day.channel(j);
      if (ds.stats.scheme == NormScheme::six_sigma) {
        const double scale = 6.0 * ds.stats.sigma[j];
        for (int t = 0; t < day.steps; ++t) ch[t] *= scale;
      } else {
        const double lo = ds.stats.min[j];
        const double range = ds.stats.max[j] - lo;
        for (int t = 0; t < day.steps; ++t) ch[t] = (ch[t] + 1.0) * 0.5 * range + lo;
      }
    }
  }
  return out;
}

void write_stats(const NormStats& stats, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write stats file " + path.string());
  char buf[128];
  for (std::size_t j = 0; j < stats.sigma.size(); ++j) {
    if (stats.scheme == NormScheme::six_sigma) {
      std::snprintf(buf, sizeof buf, "%zu,%.17g\n", j, stats.sigma[j]);
    } else {
      std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g\n", j, stats.sigma[j], stats.min[j], stats.max[j]);
    }
    out << buf;
  }
}

NormStats read_stats(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open stats file " + path.string());
  NormStats stats;
  std::string line;
  std::size_t line_no = 0;
  bool minmax = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto view = strip_cr(line);
    if (view.empty()) continue;
    const auto cells = split_commas(view);
    if (cells.size() != 2 && cells.size() != 4) throw IngestError("expected appliance_index,sigma", line_no);
    if (stats.sigma.empty()) minmax = cells.size() == 4;
    if (minmax != (cells.size() == 4)) throw IngestError("inconsistent stats columns", line_no);
    double idx = 0, sigma = 0;
    if (!parse_double(cells[0], idx) || idx != static_cast<double>(stats.sigma.size()))
      throw IngestError("appliance indices must be 0,1,2,... in order", line_no);
    if (!parse_double(cells[1], sigma) || !std::isfinite(sigma) || sigma < 0.0)
      throw IngestError("bad sigma", line_no);
    stats.sigma.push_back(sigma);
    if (minmax) {
      double lo = 0, hi = 0;
      if (!parse_double(cells[2], lo) || !parse_double(cells[3], hi) || hi < lo)
        throw IngestError("bad min/max", line_no);
      stats.min.push_back(lo);
      stats.max.push_back(hi);
    } else {
      stats.min.push_back(0.0);
      stats.max.push_back(0.0);
    }
  }
  stats.scheme = minmax ? NormScheme::minmax_tanh : NormScheme::six_sigma;
  if (stats.sigma.empty()) throw Error("stats file is empty");
  return stats;
}

}  // namespace mreal
