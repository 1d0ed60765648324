#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "metats/types.hpp"

namespace metats {

struct SummaryRow {
    AgentKind agent = AgentKind::kMetaTslb;
    int task = 1;
    double mean_cumulative_regret = 0.0;
    double stderr_ = 0.0;
};

inline constexpr const char* kTraceHeader = "run,task,round,agent,instant_regret,cumulative_regret";
inline constexpr const char* kSummaryHeader = "agent,task,mean_cumulative_regret,stderr";

// 12 significant digits, shortest form.
std::string format_real(double x);

void write_trace_row(std::ostream& out, const RegretRecord& r);
void write_trace(std::ostream& out, const RegretTrace& trace);
void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows);

// Both readers throw FormatError naming the line on any malformed row.
RegretTrace read_trace(std::istream& in);
std::vector<SummaryRow> read_summary(std::istream& in);

/// Invariant problems in a trace: negative instant regret, cumulative regret
/// decreasing within a (run, task, agent), or cumulative ≠ running sum.
std::vector<std::string> validate_trace(const RegretTrace& trace);

}  // namespace metats
