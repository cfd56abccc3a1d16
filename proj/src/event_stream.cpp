#include "ded/event_stream.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>

#include "ded/errors.hpp"

namespace ded {
namespace {

// Last bin kept closed by a detection at t.
std::int64_t closed_through(std::int64_t t, PolicyKind scheme, const ModelDims& dims) {
    switch (scheme) {
        case PolicyKind::free_running:
            return t + dims.D;
        case PolicyKind::synchronous:
            // Rest of the current period, plus every period whose start the
            // timer still covers: closed through the end of the period that
            // contains t + D.
            return ((t + dims.D) / dims.K + 1) * dims.K - 1;
    }
    throw ConfigError("unsupported gating scheme");
}

std::int64_t parse_int(std::string_view text, std::string_view what) {
    std::int64_t value = 0;
    const auto* first = text.data();
    const auto* last = text.data() + text.size();
    auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last)
        throw DataIntegrityError("cannot parse " + std::string(what) + " from '" +
                                 std::string(text) + "'");
    return value;
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::map<std::string, std::string> parse_header(const std::string& line) {
    std::map<std::string, std::string> fields;
    std::istringstream ss(line);
    std::string token;
    while (ss >> token) {
        const auto eq = token.find('=');
        if (eq == std::string::npos)
            throw DataIntegrityError("malformed header token '" + token + "'");
        fields[token.substr(0, eq)] = token.substr(eq + 1);
    }
    return fields;
}

ModelDims dims_from_header(const std::map<std::string, std::string>& fields) {
    for (const char* key : {"K", "D", "T"})
        if (!fields.count(key))
            throw DataIntegrityError(std::string("header is missing ") + key + "=");
    try {
        return ModelDims(parse_int(fields.at("K"), "K"), parse_int(fields.at("D"), "D"),
                         parse_int(fields.at("T"), "T"));
    } catch (const DomainError& e) {
        throw DataIntegrityError(std::string("invalid header: ") + e.what());
    }
}

std::string format_count(double x) {
    std::ostringstream os;
    if (x == static_cast<double>(static_cast<std::int64_t>(x)))
        os << static_cast<std::int64_t>(x);
    else
        os.precision(17), os << x;
    return os.str();
}

}  // namespace

SufficientStats ingest_event_stream(std::span<const std::int64_t> detection_bins,
                                    PolicyKind scheme, const ModelDims& dims) {
    const std::int64_t K = dims.K;
    SufficientStats stats(dims);
    std::vector<std::int64_t> closed(static_cast<std::size_t>(K), 0);
    std::int64_t closed_all_phases = 0;

    // Removes the bins [first, last] from the active counts.
    auto close_range = [&](std::int64_t first, std::int64_t last) {
        if (last < first) return;
        const std::int64_t len = last - first + 1;
        closed_all_phases += len / K;
        for (std::int64_t t = first; t < first + len % K; ++t) ++closed[static_cast<std::size_t>(t % K)];
    };

    std::int64_t prev = -1;
    std::int64_t closed_end = -1;
    for (std::int64_t t : detection_bins) {
        if (t < 0 || t >= dims.T)
            throw DataIntegrityError("detection at bin " + std::to_string(t) +
                                     " lies outside [0, " + std::to_string(dims.T) + ")");
        if (t <= prev)
            throw DataIntegrityError("detections not strictly increasing: " + std::to_string(prev) +
                                     " then " + std::to_string(t));
        if (t <= closed_end)
            throw DataIntegrityError("detections " + std::to_string(prev) + " and " +
                                     std::to_string(t) + " violate the " +
                                     std::string(to_string(scheme)) + " dead-time rule (D = " +
                                     std::to_string(dims.D) + ")");
        ++stats.S[static_cast<std::size_t>(t % K)];
        closed_end = closed_through(t, scheme, dims);
        close_range(t + 1, std::min(closed_end, dims.T - 1));
        prev = t;
    }

    const std::int64_t L = dims.L();
    const std::int64_t tail = dims.T % K;
    for (std::int64_t r = 0; r < K; ++r) {
        const std::int64_t total = L + (r < tail ? 1 : 0);
        stats.N[static_cast<std::size_t>(r)] =
            static_cast<double>(total - closed_all_phases - closed[static_cast<std::size_t>(r)]);
    }
    return stats;
}

void write_event_stream(std::ostream& out, const EventStream& stream) {
    out << "K=" << stream.dims.K << " D=" << stream.dims.D << " T=" << stream.dims.T
        << " scheme=" << to_string(stream.scheme) << '\n';
    for (std::int64_t t : stream.detections) out << t << '\n';
}

EventStream read_event_stream(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw DataIntegrityError("event stream is empty (no header)");
    const auto fields = parse_header(line);
    EventStream stream;
    stream.dims = dims_from_header(fields);
    const auto it = fields.find("scheme");
    if (it == fields.end()) throw DataIntegrityError("header is missing scheme=");
    stream.scheme = parse_policy_kind(it->second);
    while (std::getline(in, line)) {
        const std::string text = trim(line);
        if (text.empty()) continue;
        stream.detections.push_back(parse_int(text, "detection bin"));
    }
    return stream;
}

void save_event_stream(const std::filesystem::path& path, const EventStream& stream) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    write_event_stream(out, stream);
    if (!out) throw Error("write failed: " + path.string());
}

EventStream load_event_stream(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataIntegrityError("cannot open event stream " + path.string());
    try {
        return read_event_stream(in);
    } catch (const DataIntegrityError& e) {
        throw DataIntegrityError(path.string() + ": " + e.what());
    }
}

void write_stats_csv(std::ostream& out, const SufficientStats& stats) {
    out << "# K=" << stats.dims.K << " D=" << stats.dims.D << " T=" << stats.dims.T << '\n';
    out << "r,N,S\n";
    for (std::size_t r = 0; r < stats.N.size(); ++r)
        out << r << ',' << format_count(stats.N[r]) << ',' << format_count(stats.S[r]) << '\n';
}

SufficientStats read_stats_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.empty() || line[0] != '#')
        throw DataIntegrityError("stats file must start with '# K=... D=... T=...'");
    SufficientStats stats(dims_from_header(parse_header(line.substr(1))));
    if (!std::getline(in, line) || trim(line) != "r,N,S")
        throw DataIntegrityError("stats file is missing the 'r,N,S' column header");
    std::int64_t rows = 0;
    while (std::getline(in, line)) {
        const std::string text = trim(line);
        if (text.empty()) continue;
        std::istringstream ss(text);
        std::string cr, cn, cs;
        if (!std::getline(ss, cr, ',') || !std::getline(ss, cn, ',') || !std::getline(ss, cs))
            throw DataIntegrityError("malformed stats row '" + text + "'");
        const std::int64_t r = parse_int(cr, "phase");
        if (r != rows) throw DataIntegrityError("stats rows out of order at phase " + cr);
        if (r >= stats.K()) throw DataIntegrityError("more stats rows than K");
        try {
            stats.N[static_cast<std::size_t>(r)] = std::stod(cn);
            stats.S[static_cast<std::size_t>(r)] = std::stod(cs);
        } catch (const std::exception&) {
            throw DataIntegrityError("malformed stats row '" + text + "'");
        }
        ++rows;
    }
    if (rows != stats.K())
        throw DataIntegrityError("expected " + std::to_string(stats.K()) + " stats rows, got " +
                                 std::to_string(rows));
    return stats;
}

void save_stats_csv(const std::filesystem::path& path, const SufficientStats& stats) {
    std::ofstream out(path);
    if (!out) throw Error("cannot open " + path.string() + " for writing");
    write_stats_csv(out, stats);
    if (!out) throw Error("write failed: " + path.string());
}

SufficientStats load_stats_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataIntegrityError("cannot open stats file " + path.string());
    return read_stats_csv(in);
}

}  // namespace ded
