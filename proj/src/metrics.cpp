#include "tacnet/metrics.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

namespace tacnet {

double compute_rti(const std::vector<double>& ratios) {
  if (ratios.empty()) throw Error("rti: need at least one link");
  double sum = 0.0;
  for (double r : ratios) {
    if (!(r > 0.0) || !std::isfinite(r)) throw Error("rti: ratios must be positive and finite");
    sum += r;
  }
  return std::log(sum / static_cast<double>(ratios.size()));
}

double compute_rti(const RtiInputs& in) {
  std::vector<double> ratios;
  for (const auto& l : in.per_link) {
    if (!(l.rtt_nom_ms > 0.0)) throw Error("rti: rtt_nom must be > 0");
    ratios.push_back(l.rtt_max_ms / l.rtt_nom_ms);
  }
  return compute_rti(ratios);
}

RtiInputs split_rtt_by_link(const std::vector<RttSample>& trace, const TransitionSchedule& schedule) {
  schedule.validate();
  std::vector<LinkRtt> seg(schedule.entries.size());
  for (std::size_t i = 0; i < seg.size(); ++i) {
    seg[i].profile = schedule.entries[i].profile.name;
    seg[i].rtt_nom_ms = schedule.entries[i].profile.nominal_rtt_s() * 1000.0;
  }
  for (const auto& s : trace) {
    LinkRtt& l = seg[schedule.index_at(s.time_s)];
    l.rtt_max_ms = l.samples == 0 ? s.rtt_ms : std::max(l.rtt_max_ms, s.rtt_ms);
    ++l.samples;
  }
  RtiInputs out;
  for (auto& l : seg) {
    if (l.samples == 0) {
      out.omitted.push_back(l.profile);
      continue;
    }
    if (l.rtt_max_ms < l.rtt_nom_ms) out.below_nominal = true;
    out.per_link.push_back(std::move(l));
  }
  return out;
}

std::vector<SummaryRow> aggregate(const std::vector<EpisodeReport>& reports) {
  if (reports.empty()) throw Error("aggregate: no reports");
  std::map<std::pair<std::string, double>, std::vector<const EpisodeReport*>> groups;
  for (const auto& r : reports) groups[{r.policy, r.loss_c}].push_back(&r);
  std::vector<SummaryRow> rows;
  for (const auto& [key, items] : groups) {
    auto stats = [&](auto get) {
      double sum = 0.0;
      for (const auto* r : items) sum += get(*r);
      const double mean = sum / static_cast<double>(items.size());
      double ss = 0.0;
      for (const auto* r : items) ss += (get(*r) - mean) * (get(*r) - mean);
      return std::pair{mean, std::sqrt(ss / static_cast<double>(items.size()))};
    };
    SummaryRow row;
    row.policy = key.first;
    row.loss_c = key.second;
    row.episodes = items.size();
    std::tie(row.time_mean, row.time_std) = stats([](const EpisodeReport& r) { return r.completion_time_s; });
    std::tie(row.retx_mean, row.retx_std) =
        stats([](const EpisodeReport& r) { return static_cast<double>(r.retransmissions); });
    std::tie(row.rti_mean, row.rti_std) = stats([](const EpisodeReport& r) { return r.rti; });
    rows.push_back(row);
  }
  return rows;
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void write_episode_csv(std::ostream& os, const std::vector<EpisodeReport>& reports) {
  os << "policy,loss_c,seed,completion_time_s,retransmissions,rti,terminal,rti_flagged\n";
  for (const auto& r : reports) {
    os << r.policy << ',' << format_double(r.loss_c) << ',' << r.seed << ',' << format_double(r.completion_time_s)
       << ',' << r.retransmissions << ',' << format_double(r.rti) << ',' << (r.terminal ? 1 : 0) << ','
       << (r.rti_flagged ? 1 : 0) << '\n';
  }
}

namespace {

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double to_double(const std::string& s, const std::string& col) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw Error("episode csv: bad value in " + col + ": " + s);
  return v;
}

}  // namespace

std::vector<EpisodeReport> read_episode_csv(std::istream& is) {
  static const std::vector<std::string> required{"policy", "loss_c", "seed", "completion_time_s", "retransmissions",
                                                 "rti"};
  std::string line;
  if (!std::getline(is, line)) throw Error("episode csv: empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_csv(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  std::string missing;
  for (const auto& r : required)
    if (!col.count(r)) missing += (missing.empty() ? "" : ", ") + r;
  if (!missing.empty()) throw Error("episode csv schema error: missing column(s) " + missing);

  std::vector<EpisodeReport> out;
  while (std::getline(is, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size()) throw Error("episode csv: row has " + std::to_string(cells.size()) + " cells");
    EpisodeReport r;
    r.policy = cells[col["policy"]];
    r.loss_c = to_double(cells[col["loss_c"]], "loss_c");
    r.seed = static_cast<std::uint64_t>(std::stoull(cells[col["seed"]]));
    r.completion_time_s = to_double(cells[col["completion_time_s"]], "completion_time_s");
    r.retransmissions = static_cast<std::int64_t>(to_double(cells[col["retransmissions"]], "retransmissions"));
    r.rti = to_double(cells[col["rti"]], "rti");
    if (col.count("terminal")) r.terminal = cells[col["terminal"]] == "1";
    if (col.count("rti_flagged")) r.rti_flagged = cells[col["rti_flagged"]] == "1";
    out.push_back(std::move(r));
  }
  if (out.empty()) throw Error("episode csv: no rows");
  return out;
}

void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows) {
  os << "policy,loss_c,episodes,time_mean_s,time_std_s,retx_mean,retx_std,rti_mean,rti_std\n";
  for (const auto& r : rows) {
    os << r.policy << ',' << format_double(r.loss_c) << ',' << r.episodes << ',' << format_double(r.time_mean) << ','
       << format_double(r.time_std) << ',' << format_double(r.retx_mean) << ',' << format_double(r.retx_std) << ','
       << format_double(r.rti_mean) << ',' << format_double(r.rti_std) << '\n';
  }
}

std::string summary_json(const std::vector<SummaryRow>& rows) {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& r : rows) {
    j.push_back({{"policy", r.policy},
                 {"loss_c", r.loss_c},
                 {"episodes", r.episodes},
                 {"time_mean_s", r.time_mean},
                 {"time_std_s", r.time_std},
                 {"retx_mean", r.retx_mean},
                 {"retx_std", r.retx_std},
                 {"rti_mean", r.rti_mean},
                 {"rti_std", r.rti_std}});
  }
  return j.dump(2) + "\n";
}

}  // namespace tacnet
