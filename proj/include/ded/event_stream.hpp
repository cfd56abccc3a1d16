#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "ded/gating.hpp"
#include "ded/model.hpp"

namespace ded {

/// Detection record of one acquisition as absolute bin indices.
struct EventStream {
    ModelDims dims;
    PolicyKind scheme = PolicyKind::free_running;
    std::vector<std::int64_t> detections;
};

/// Rebuilds the deterministic gate sequence implied by `scheme` and the
/// detection record, then accumulates the phase counts.
///
/// Throws DataIntegrityError if the detections are not strictly increasing,
/// fall outside [0, T), or land in a bin the scheme keeps closed (the
/// message names the offending pair).
SufficientStats ingest_event_stream(std::span<const std::int64_t> detection_bins,
                                    PolicyKind scheme, const ModelDims& dims);

inline SufficientStats ingest_event_stream(const EventStream& stream) {
    return ingest_event_stream(stream.detections, stream.scheme, stream.dims);
}

// Event-stream text format:
//   K=<int> D=<int> T=<int> scheme=<free_running|synchronous>
//   <bin>
//   ...
void write_event_stream(std::ostream& out, const EventStream& stream);
EventStream read_event_stream(std::istream& in);
void save_event_stream(const std::filesystem::path& path, const EventStream& stream);
EventStream load_event_stream(const std::filesystem::path& path);

// Sufficient-statistics CSV:
//   # K=<int> D=<int> T=<int>
//   r,N,S
//   0,<N_0>,<S_0>
//   ...
void write_stats_csv(std::ostream& out, const SufficientStats& stats);
SufficientStats read_stats_csv(std::istream& in);
void save_stats_csv(const std::filesystem::path& path, const SufficientStats& stats);
SufficientStats load_stats_csv(const std::filesystem::path& path);

}  // namespace ded
