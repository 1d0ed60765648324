#include "metats/csv_io.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>
#include <tuple>

#include "metats/errors.hpp"

namespace metats {

std::string format_real(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.12g", x);
    return buf;
}

void write_trace_row(std::ostream& out, const RegretRecord& r) {
    out << r.run << ',' << r.task << ',' << r.round << ',' << to_string(r.agent) << ','
        << format_real(r.instant_regret) << ',' << format_real(r.cumulative_regret) << '\n';
}

void write_trace(std::ostream& out, const RegretTrace& trace) {
    out << kTraceHeader << '\n';
    for (const RegretRecord& r : trace.records) write_trace_row(out, r);
}

void write_summary(std::ostream& out, const std::vector<SummaryRow>& rows) {
    out << kSummaryHeader << '\n';
    for (const SummaryRow& r : rows) {
        out << to_string(r.agent) << ',' << r.task << ',' << format_real(r.mean_cumulative_regret) << ','
            << format_real(r.stderr_) << '\n';
    }
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        cells.push_back(line.substr(start, comma - start));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return cells;
}

[[noreturn]] void bad(std::size_t line_no, const std::string& what) {
    throw FormatError("line " + std::to_string(line_no) + ": " + what);
}

template <class T>
T parse_number(std::string_view cell, std::size_t line_no, const char* column) {
    T value{};
    const auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (ec != std::errc() || ptr != cell.data() + cell.size()) {
        bad(line_no, std::string("column ") + column + " is not a number: '" + std::string(cell) + "'");
    }
    return value;
}

AgentKind parse_agent_cell(std::string_view cell, std::size_t line_no) {
    const auto agent = parse_agent(cell);
    if (!agent) bad(line_no, "unknown agent '" + std::string(cell) + "'");
    return *agent;
}

template <class Row>
std::vector<Row> read_rows(std::istream& in, const char* header, std::size_t columns,
                           Row (*parse)(const std::vector<std::string_view>&, std::size_t)) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("empty file: header missing");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != header) {
        // Name the first expected column that is absent.
        const auto got = split(line);
        for (std::string_view want : split(header)) {
            bool found = false;
            for (std::string_view g : got) found = found || g == want;
            if (!found) throw FormatError("header lacks column '" + std::string(want) + "'");
        }
        throw FormatError(std::string("header must be exactly '") + header + "'");
    }
    std::vector<Row> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != columns) {
            bad(line_no, "expected " + std::to_string(columns) + " columns, got " + std::to_string(cells.size()));
        }
        rows.push_back(parse(cells, line_no));
    }
    return rows;
}

RegretRecord parse_trace_row(const std::vector<std::string_view>& c, std::size_t line_no) {
    RegretRecord r;
    r.run = parse_number<int>(c[0], line_no, "run");
    r.task = parse_number<int>(c[1], line_no, "task");
    r.round = parse_number<int>(c[2], line_no, "round");
    r.agent = parse_agent_cell(c[3], line_no);
    r.instant_regret = parse_number<double>(c[4], line_no, "instant_regret");
    r.cumulative_regret = parse_number<double>(c[5], line_no, "cumulative_regret");
    return r;
}

SummaryRow parse_summary_row(const std::vector<std::string_view>& c, std::size_t line_no) {
    SummaryRow r;
    r.agent = parse_agent_cell(c[0], line_no);
    r.task = parse_number<int>(c[1], line_no, "task");
    r.mean_cumulative_regret = parse_number<double>(c[2], line_no, "mean_cumulative_regret");
    r.stderr_ = parse_number<double>(c[3], line_no, "stderr");
    return r;
}

}  // namespace

RegretTrace read_trace(std::istream& in) {
    return {read_rows<RegretRecord>(in, kTraceHeader, 6, &parse_trace_row)};
}

std::vector<SummaryRow> read_summary(std::istream& in) {
    return read_rows<SummaryRow>(in, kSummaryHeader, 4, &parse_summary_row);
}

std::vector<std::string> validate_trace(const RegretTrace& trace) {
    std::vector<std::string> problems;
    struct Last {
        int round = 0;
        double cumulative = 0.0;
    };
    std::map<std::tuple<int, int, AgentKind>, Last> last;
    for (const RegretRecord& r : trace.records) {
        const std::string where = "run " + std::to_string(r.run) + ", task " + std::to_string(r.task) + ", round " +
                                  std::to_string(r.round) + ", " + std::string(to_string(r.agent));
        if (r.instant_regret < 0.0) problems.push_back(where + ": negative instant regret");
        Last& prev = last[{r.run, r.task, r.agent}];
        if (r.round != prev.round + 1) problems.push_back(where + ": rounds out of sequence");
        if (r.cumulative_regret < prev.cumulative) problems.push_back(where + ": cumulative regret decreased");
        // Values are printed with 12 significant digits, so compare loosely.
        const double expect = prev.cumulative + r.instant_regret;
        if (std::abs(r.cumulative_regret - expect) > 1e-9 * std::max(1.0, std::abs(expect))) {
            problems.push_back(where + ": cumulative regret is not the running sum");
        }
        prev = {r.round, r.cumulative_regret};
    }
    return problems;
}

}  // namespace metats
