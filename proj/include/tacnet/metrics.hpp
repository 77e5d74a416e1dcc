#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "tacnet/topology.hpp"
#include "tacnet/transport.hpp"

namespace tacnet {

struct LinkRtt {
  std::string profile;
  double rtt_max_ms = 0.0;
  double rtt_nom_ms = 0.0;
  std::size_t samples = 0;
};

struct RtiInputs {
  std::vector<LinkRtt> per_link;
  /// Profiles of the schedule that saw no samples and were left out.
  std::vector<std::string> omitted;
  /// Some kept link measured a maximum below its nominal round trip.
  bool below_nominal = false;
};

/// ln(mean over links of rtt_max / rtt_nom).
double compute_rti(const RtiInputs& inputs);
double compute_rti(const std::vector<double>& ratios);

/// Attributes each sample to the profile active when it completed; a sample
/// at exactly a transition instant belongs to the new profile.
RtiInputs split_rtt_by_link(const std::vector<RttSample>& trace, const TransitionSchedule& schedule);

struct EpisodeReport {
  std::string policy;
  double loss_c = 0.0;
  std::uint64_t seed = 0;
  double completion_time_s = 0.0;
  std::int64_t retransmissions = 0;
  double rti = 0.0;
  bool terminal = true;
  bool rti_flagged = false;  // links omitted or ratios below one
};

struct SummaryRow {
  std::string policy;
  double loss_c = 0.0;
  std::size_t episodes = 0;
  double time_mean = 0.0;
  double time_std = 0.0;
  double retx_mean = 0.0;
  double retx_std = 0.0;
  double rti_mean = 0.0;
  double rti_std = 0.0;
};

/// Mean and population standard deviation per (policy, loss_c), ordered by
/// policy then loss.
std::vector<SummaryRow> aggregate(const std::vector<EpisodeReport>& reports);

void write_episode_csv(std::ostream& os, const std::vector<EpisodeReport>& reports);
std::vector<EpisodeReport> read_episode_csv(std::istream& is);
void write_summary_csv(std::ostream& os, const std::vector<SummaryRow>& rows);
std::string summary_json(const std::vector<SummaryRow>& rows);

/// Shortest decimal form that parses back to the same double.
std::string format_double(double v);

}  // namespace tacnet
