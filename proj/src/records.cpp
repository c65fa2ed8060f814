#include "apelab/records.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace apelab {

std::string format_number(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

void write_run_csv(std::ostream& out, const RunLog& log) {
  out << "seed,episode,return,tracked_value_1,tracked_value_2,pi_r_at_A\n";
  for (const RunRecord& r : log) {
    out << r.seed << ',' << r.episode << ',' << format_number(r.return_) << ','
        << format_number(r.tracked_value_1) << ',' << format_number(r.tracked_value_2) << ',';
    if (r.policy_statistic) out << format_number(*r.policy_statistic);
    out << '\n';
  }
}

namespace {

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream ss(line);
  while (std::getline(ss, field, ',')) fields.push_back(field);
  if (!line.empty() && line.back() == ',') fields.emplace_back();
  return fields;
}

/// Header lookup that names the first missing required column.
class Columns {
 public:
  Columns(std::string what, std::vector<std::string> header, std::vector<std::string> required)
      : what_(std::move(what)), header_(std::move(header)) {
    for (const auto& col : required) {
      if (std::find(header_.begin(), header_.end(), col) == header_.end()) {
        throw std::runtime_error(what_ + " is missing column '" + col + "'");
      }
    }
  }

  std::size_t at(const std::string& col) const {
    return static_cast<std::size_t>(std::find(header_.begin(), header_.end(), col) - header_.begin());
  }

  std::vector<std::string> row(const std::string& line) const {
    auto f = split(line);
    if (f.size() < header_.size()) throw std::runtime_error("short row in " + what_ + ": " + line);
    return f;
  }

 private:
  std::string what_;
  std::vector<std::string> header_;
};

}  // namespace

RunLog read_run_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("run CSV is empty");
  const Columns cols("run CSV", split(line),
                     {"seed", "episode", "return", "tracked_value_1", "tracked_value_2", "pi_r_at_A"});
  RunLog log;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = cols.row(line);
    RunRecord r;
    r.seed = std::stoull(f[cols.at("seed")]);
    r.episode = std::stoll(f[cols.at("episode")]);
    r.return_ = std::stod(f[cols.at("return")]);
    r.tracked_value_1 = std::stod(f[cols.at("tracked_value_1")]);
    r.tracked_value_2 = std::stod(f[cols.at("tracked_value_2")]);
    const auto& pi = f[cols.at("pi_r_at_A")];
    if (!pi.empty()) r.policy_statistic = std::stod(pi);
    log.push_back(r);
  }
  return log;
}

std::vector<AggregateRow> read_aggregate_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("aggregate CSV is empty");
  const Columns cols("aggregate CSV", split(line),
                     {"episode", "n", "mean_return", "se_return", "mean_tracked_value_1",
                      "se_tracked_value_1", "mean_tracked_value_2", "se_tracked_value_2",
                      "mean_pi_r_at_A", "se_pi_r_at_A"});
  std::vector<AggregateRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto f = cols.row(line);
    auto num = [&](const char* name) { return std::stod(f[cols.at(name)]); };
    AggregateRow r;
    r.episode = std::stoll(f[cols.at("episode")]);
    r.n = std::stoi(f[cols.at("n")]);
    r.mean_return = num("mean_return");
    r.se_return = num("se_return");
    r.mean_tracked_1 = num("mean_tracked_value_1");
    r.se_tracked_1 = num("se_tracked_value_1");
    r.mean_tracked_2 = num("mean_tracked_value_2");
    r.se_tracked_2 = num("se_tracked_value_2");
    if (!f[cols.at("mean_pi_r_at_A")].empty()) r.mean_policy = num("mean_pi_r_at_A");
    if (!f[cols.at("se_pi_r_at_A")].empty()) r.se_policy = num("se_pi_r_at_A");
    rows.push_back(r);
  }
  return rows;
}

MeanSe mean_and_se(const std::vector<double>& xs) {
  if (xs.empty()) return {};
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  if (xs.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  const double sd = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  return {mean, sd / std::sqrt(static_cast<double>(xs.size()))};
}

std::vector<AggregateRow> aggregate_runs(const std::vector<RunLog>& runs) {
  std::size_t longest = 0;
  for (const auto& r : runs) longest = std::max(longest, r.size());
  std::vector<AggregateRow> rows;
  rows.reserve(longest);
  for (std::size_t i = 0; i < longest; ++i) {
    std::vector<double> ret, t1, t2, pi;
    AggregateRow row;
    for (const auto& run : runs) {
      if (i >= run.size()) continue;
      const RunRecord& rec = run[i];
      row.episode = rec.episode;
      ret.push_back(rec.return_);
      t1.push_back(rec.tracked_value_1);
      t2.push_back(rec.tracked_value_2);
      if (rec.policy_statistic) pi.push_back(*rec.policy_statistic);
    }
    row.n = static_cast<int>(ret.size());
    const MeanSe r = mean_and_se(ret), a = mean_and_se(t1), b = mean_and_se(t2);
    row.mean_return = r.mean;
    row.se_return = r.se;
    row.mean_tracked_1 = a.mean;
    row.se_tracked_1 = a.se;
    row.mean_tracked_2 = b.mean;
    row.se_tracked_2 = b.se;
    if (!pi.empty()) {
      const MeanSe p = mean_and_se(pi);
      row.mean_policy = p.mean;
      row.se_policy = p.se;
    }
    rows.push_back(row);
  }
  return rows;
}

void write_aggregate_csv(std::ostream& out, const std::vector<AggregateRow>& rows) {
  out << "episode,n,mean_return,se_return,mean_tracked_value_1,se_tracked_value_1,"
         "mean_tracked_value_2,se_tracked_value_2,mean_pi_r_at_A,se_pi_r_at_A\n";
  for (const AggregateRow& r : rows) {
    out << r.episode << ',' << r.n << ',' << format_number(r.mean_return) << ','
        << format_number(r.se_return) << ',' << format_number(r.mean_tracked_1) << ','
        << format_number(r.se_tracked_1) << ',' << format_number(r.mean_tracked_2) << ','
        << format_number(r.se_tracked_2) << ',';
    if (r.mean_policy) out << format_number(*r.mean_policy);
    out << ',';
    if (r.se_policy) out << format_number(*r.se_policy);
    out << '\n';
  }
}

double tail_mean(const RunLog& log, double fraction,
                 const std::function<double(const RunRecord&)>& field) {
  if (log.empty()) throw std::invalid_argument("tail_mean of an empty run");
  const auto count = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(log.size()))));
  double sum = 0.0;
  for (std::size_t i = log.size() - count; i < log.size(); ++i) sum += field(log[i]);
  return sum / static_cast<double>(count);
}

}  // namespace apelab
