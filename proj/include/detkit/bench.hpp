#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "detkit/errors.hpp"

namespace detkit {

/// What an adapter hands back per input. The harness always prefers its own
/// wall-clock over `self_reported_ms`; adapters wrapping external processes
/// cannot be trusted to self-time consistently.
struct DetectorResult {
  std::string output;  // typically a prediction-file path
  std::optional<double> self_reported_ms;
};

/// Synchronous per-input callable. One call in flight at a time, always.
using Detector = std::function<DetectorResult(const std::string& input)>;

struct LatencyStats {
  int samples = 0;
  double mean_ms = 0.0;  // clamped to >= 1 us so fps stays finite
  double median_ms = 0.0;
  double p95_ms = 0.0;
  double fps = 0.0;  // 1000 / mean_ms
};

/// Thrown when the detector fails mid-run; carries the samples collected so
/// far so a partial report can still be printed.
class DetectorFailure : public Error {
 public:
  DetectorFailure(const std::string& message, int completed_samples,
                  std::optional<LatencyStats> partial)
      : Error(message),
        completed_samples_(completed_samples),
        partial_(partial) {}

  int completed_samples() const noexcept { return completed_samples_; }
  const std::optional<LatencyStats>& partial() const noexcept {
    return partial_;
  }

 private:
  int completed_samples_;
  std::optional<LatencyStats> partial_;
};

/// Runs `warmup` untimed calls, then `iterations` timed ones, cycling over
/// the inputs. Strictly single-threaded and serialized: wall-clock
/// (monotonic) time brackets each call. Throws UsageError on bad counts or
/// empty inputs, DetectorFailure when the detector throws mid-run.
LatencyStats benchmark(const Detector& detector,
                       std::span<const std::string> inputs, int warmup,
                       int iterations);

/// Declared complexity metadata; the toolkit contains no network, so
/// parameters and GFLOPs are inputs, never computed.
struct ModelMeta {
  std::string name;
  double params_m = 0.0;   // parameter count, millions
  double gflops = 0.0;     // per forward pass
  double latency_ms = 0.0; // measured or declared end-to-end time

  void validate() const;
};

struct EfficiencyRow {
  ModelMeta model;
  double fps = 0.0;
  double param_ratio = 1.0;           // vs the first model
  double gflops_ratio = 1.0;          // vs the first model
  double latency_increase_pct = 0.0;  // (b - a) / a * 100 vs the first model
};

/// Per-model fps plus pairwise ratios against the first model.
/// Throws UsageError with fewer than two models.
std::vector<EfficiencyRow> efficiency_report(std::span<const ModelMeta> models);

/// Adapter-as-subprocess protocol: the command is spawned once through
/// /bin/sh; the harness writes one input path per line to its stdin and
/// reads one prediction-file path per line from its stdout. The child must
/// flush after each line. SIGPIPE is ignored process-wide on construction.
class SubprocessDetector {
 public:
  explicit SubprocessDetector(const std::string& command);
  ~SubprocessDetector();

  SubprocessDetector(const SubprocessDetector&) = delete;
  SubprocessDetector& operator=(const SubprocessDetector&) = delete;

  DetectorResult operator()(const std::string& input_path);

 private:
  int pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  std::string buffer_;
};

}  // namespace detkit
