#include "flags/metrics.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <string>

#include "flags/error.hpp"

namespace flags {

MetricsLog::MetricsLog(const MetricsLog& other) {
  std::lock_guard lock(other.mu_);
  rows_ = other.rows_;
  comm_ = other.comm_;
  meta_ = other.meta_;
}

MetricsLog& MetricsLog::operator=(const MetricsLog& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  rows_ = other.rows_;
  comm_ = other.comm_;
  meta_ = other.meta_;
  return *this;
}

void MetricsLog::record_message(Link link, int round) {
  if (round < 1) throw InvalidArgument("rounds are numbered from 1");
  std::lock_guard lock(mu_);
  if (comm_.size() < static_cast<std::size_t>(round)) comm_.resize(static_cast<std::size_t>(round));
  CommCounts& c = comm_[static_cast<std::size_t>(round) - 1];
  switch (link) {
    case Link::d2d: ++c.d2d; break;
    case Link::d2e: ++c.d2e; break;
    case Link::e2c: ++c.e2c; break;
  }
}

void MetricsLog::add_row(const AccuracyRow& row) {
  std::lock_guard lock(mu_);
  rows_.push_back(row);
}

void MetricsLog::touch_round(int round) {
  std::lock_guard lock(mu_);
  if (round >= 1 && comm_.size() < static_cast<std::size_t>(round))
    comm_.resize(static_cast<std::size_t>(round));
}

void MetricsLog::set_round_comm(int round, const CommCounts& counts) {
  if (round < 1) throw InvalidArgument("rounds are numbered from 1");
  std::lock_guard lock(mu_);
  if (comm_.size() < static_cast<std::size_t>(round)) comm_.resize(static_cast<std::size_t>(round));
  comm_[static_cast<std::size_t>(round) - 1] = counts;
}

CommCounts MetricsLog::comm_for_round(int round) const {
  std::lock_guard lock(mu_);
  if (round < 1 || static_cast<std::size_t>(round) > comm_.size()) return {};
  return comm_[static_cast<std::size_t>(round) - 1];
}

std::vector<SummaryRow> summarize(const MetricsLog& log) {
  if (log.rows().empty()) throw InvalidArgument("cannot summarize an empty metrics log");
  std::map<int, std::vector<const AccuracyRow*>> by_round;
  for (const auto& r : log.rows()) by_round[r.round].push_back(&r);

  std::vector<CommCounts> prefix(log.comm().size());
  CommCounts running;
  for (std::size_t i = 0; i < log.comm().size(); ++i) {
    running.d2d += log.comm()[i].d2d;
    running.d2e += log.comm()[i].d2e;
    running.e2c += log.comm()[i].e2c;
    prefix[i] = running;
  }

  std::vector<SummaryRow> out;
  for (const auto& [round, rows] : by_round) {
    SummaryRow s;
    s.round = round;
    const auto n = static_cast<double>(rows.size());
    double acc = 0.0, loss = 0.0;
    for (const auto* r : rows) {
      acc += r->accuracy;
      loss += r->loss;
    }
    s.mean_accuracy = acc / n;
    s.mean_loss = loss / n;
    double var = 0.0;
    for (const auto* r : rows) var += (r->accuracy - s.mean_accuracy) * (r->accuracy - s.mean_accuracy);
    s.std_accuracy = std::sqrt(var / n);
    if (round >= 1 && static_cast<std::size_t>(round) <= prefix.size())
      s.cumulative = prefix[static_cast<std::size_t>(round) - 1];
    else if (!prefix.empty() && round >= 1)
      s.cumulative = prefix.back();
    out.push_back(s);
  }
  return out;
}

std::string format_double(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc()) throw Error("failed to format a double");
  return std::string(buf, end);
}

double parse_double(std::string_view text) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size())
    throw FormatError(FormatError::Kind::malformed, "not a number: '" + std::string(text) + "'");
  return v;
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(FormatError::Kind::io, "cannot write " + path.string());
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> fields;
  std::stringstream ss(line);
  std::string f;
  while (std::getline(ss, f, ',')) fields.push_back(f);
  return fields;
}

template <typename Int>
Int parse_int(const std::string& text, const std::filesystem::path& path) {
  Int v{};
  auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size())
    throw FormatError(FormatError::Kind::malformed, path.string() + ": bad integer '" + text + "'");
  return v;
}

}  // namespace

void export_metrics(const MetricsLog& log, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw FormatError(FormatError::Kind::io, "cannot create " + dir.string() + ": " + ec.message());

  {
    auto out = open_out(dir / "metrics.csv");
    out << "round,node,accuracy,loss\n";
    for (const auto& r : log.rows())
      out << r.round << ',' << r.node << ',' << format_double(r.accuracy) << ','
          << format_double(r.loss) << '\n';
    if (!out) throw FormatError(FormatError::Kind::io, "write failed: " + (dir / "metrics.csv").string());
  }
  {
    auto out = open_out(dir / "comm.csv");
    out << "round,d2d,d2e,e2c\n";
    for (std::size_t i = 0; i < log.comm().size(); ++i) {
      const auto& c = log.comm()[i];
      out << i + 1 << ',' << c.d2d << ',' << c.d2e << ',' << c.e2c << '\n';
    }
    if (!out) throw FormatError(FormatError::Kind::io, "write failed: " + (dir / "comm.csv").string());
  }
  {
    auto out = open_out(dir / "run.json");
    out << log.run_meta().dump(2) << '\n';
    if (!out) throw FormatError(FormatError::Kind::io, "write failed: " + (dir / "run.json").string());
  }
}

MetricsLog import_metrics(const std::filesystem::path& dir) {
  MetricsLog log;
  {
    const auto path = dir / "metrics.csv";
    std::ifstream in(path);
    if (!in) throw FormatError(FormatError::Kind::io, "cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "round,node,accuracy,loss")
      throw FormatError(FormatError::Kind::malformed, path.string() + ": unexpected header");
    while (std::getline(in, line)) {
      auto f = split_csv(line);
      if (f.size() != 4) throw FormatError(FormatError::Kind::malformed, path.string() + ": bad row");
      log.add_row({parse_int<int>(f[0], path), parse_int<std::size_t>(f[1], path), parse_double(f[2]),
                   parse_double(f[3])});
    }
  }
  {
    const auto path = dir / "comm.csv";
    std::ifstream in(path);
    if (!in) throw FormatError(FormatError::Kind::io, "cannot read " + path.string());
    std::string line;
    if (!std::getline(in, line) || line != "round,d2d,d2e,e2c")
      throw FormatError(FormatError::Kind::malformed, path.string() + ": unexpected header");
    while (std::getline(in, line)) {
      auto f = split_csv(line);
      if (f.size() != 4) throw FormatError(FormatError::Kind::malformed, path.string() + ": bad row");
      const int round = parse_int<int>(f[0], path);
      log.set_round_comm(round, {parse_int<std::uint64_t>(f[1], path),
                                 parse_int<std::uint64_t>(f[2], path),
                                 parse_int<std::uint64_t>(f[3], path)});
    }
  }
  {
    const auto path = dir / "run.json";
    std::ifstream in(path);
    if (in) {
      try {
        log.run_meta() = nlohmann::json::parse(in);
      } catch (const nlohmann::json::exception& e) {
        throw FormatError(FormatError::Kind::malformed, path.string() + ": " + e.what());
      }
    }
  }
  return log;
}

}  // namespace flags
