#include "detkit/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstring>
#include <string>

#include <sys/wait.h>
#include <unistd.h>

namespace detkit {

namespace {

constexpr double kMinMeanMs = 1e-3;  // 1 us; keeps fps finite

LatencyStats stats_from(const std::vector<double>& samples_ms) {
  LatencyStats stats;
  stats.samples = static_cast<int>(samples_ms.size());
  if (samples_ms.empty()) return stats;

  double sum = 0.0;
  for (double s : samples_ms) sum += s;
  stats.mean_ms = std::max(sum / static_cast<double>(samples_ms.size()),
                           kMinMeanMs);

  std::vector<double> sorted(samples_ms);
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  stats.median_ms = n % 2 == 1
                        ? sorted[n / 2]
                        : (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0;
  const std::size_t p95_rank =
      static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
  stats.p95_ms = sorted[std::min(n - 1, p95_rank == 0 ? 0 : p95_rank - 1)];
  stats.fps = 1000.0 / stats.mean_ms;
  return stats;
}

}  // namespace

LatencyStats benchmark(const Detector& detector,
                       std::span<const std::string> inputs, int warmup,
                       int iterations) {
  if (iterations < 1) {
    throw UsageError("iterations must be >= 1, got " +
                     std::to_string(iterations));
  }
  if (warmup < 0) {
    throw UsageError("warmup must be >= 0, got " + std::to_string(warmup));
  }
  if (inputs.empty()) {
    throw UsageError("no benchmark inputs");
  }

  std::vector<double> samples_ms;
  samples_ms.reserve(static_cast<std::size_t>(iterations));
  const int total = warmup + iterations;
  for (int k = 0; k < total; ++k) {
    const std::string& input = inputs[static_cast<std::size_t>(k) %
                                      inputs.size()];
    const auto start = std::chrono::steady_clock::now();
    try {
      detector(input);
    } catch (const std::exception& e) {
      const int completed = static_cast<int>(samples_ms.size());
      throw DetectorFailure(
          "detector failed on call " + std::to_string(k + 1) + " of " +
              std::to_string(total) + ": " + e.what(),
          completed,
          completed > 0 ? std::optional<LatencyStats>(stats_from(samples_ms))
                        : std::nullopt);
    }
    const auto stop = std::chrono::steady_clock::now();
    if (k >= warmup) {
      samples_ms.push_back(
          std::chrono::duration<double, std::milli>(stop - start).count());
    }
  }
  return stats_from(samples_ms);
}

void ModelMeta::validate() const {
  if (name.empty()) {
    throw ValidationError("model name is empty");
  }
  if (!(params_m > 0.0) || !(gflops > 0.0) || !(latency_ms > 0.0)) {
    throw ValidationError("model '" + name +
                          "' needs positive parameters, gflops, and latency");
  }
}

std::vector<EfficiencyRow> efficiency_report(
    std::span<const ModelMeta> models) {
  if (models.size() < 2) {
    throw UsageError("efficiency report needs at least two models");
  }
  for (const ModelMeta& m : models) m.validate();

  const ModelMeta& base = models[0];
  std::vector<EfficiencyRow> rows;
  rows.reserve(models.size());
  for (const ModelMeta& m : models) {
    EfficiencyRow row;
    row.model = m;
    row.fps = 1000.0 / m.latency_ms;
    row.param_ratio = m.params_m / base.params_m;
    row.gflops_ratio = m.gflops / base.gflops;
    row.latency_increase_pct =
        (m.latency_ms - base.latency_ms) / base.latency_ms * 100.0;
    rows.push_back(std::move(row));
  }
  return rows;
}

SubprocessDetector::SubprocessDetector(const std::string& command) {
  std::signal(SIGPIPE, SIG_IGN);

  int to_child[2];
  int from_child[2];
  if (pipe(to_child) != 0 || pipe(from_child) != 0) {
    throw Error("cannot create adapter pipes: " +
                std::string(std::strerror(errno)));
  }
  const pid_t pid = fork();
  if (pid < 0) {
    throw Error("cannot fork adapter process: " +
                std::string(std::strerror(errno)));
  }
  if (pid == 0) {
    dup2(to_child[0], STDIN_FILENO);
    dup2(from_child[1], STDOUT_FILENO);
    close(to_child[0]);
    close(to_child[1]);
    close(from_child[0]);
    close(from_child[1]);
    execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  close(to_child[0]);
  close(from_child[1]);
  pid_ = pid;
  to_child_ = to_child[1];
  from_child_ = from_child[0];
}

SubprocessDetector::~SubprocessDetector() {
  if (to_child_ >= 0) close(to_child_);
  if (from_child_ >= 0) close(from_child_);
  if (pid_ > 0) {
    int status = 0;
    waitpid(pid_, &status, 0);
  }
}

DetectorResult SubprocessDetector::operator()(const std::string& input_path) {
  const std::string line = input_path + "\n";
  std::size_t written = 0;
  while (written < line.size()) {
    const ssize_t n =
        write(to_child_, line.data() + written, line.size() - written);
    if (n <= 0) {
      throw Error("adapter closed its input stream");
    }
    written += static_cast<std::size_t>(n);
  }

  while (true) {
    const std::size_t newline = buffer_.find('\n');
    if (newline != std::string::npos) {
      std::string out = buffer_.substr(0, newline);
      buffer_.erase(0, newline + 1);
      if (!out.empty() && out.back() == '\r') out.pop_back();
      return DetectorResult{std::move(out), std::nullopt};
    }
    char chunk[4096];
    const ssize_t n = read(from_child_, chunk, sizeof(chunk));
    if (n <= 0) {
      throw Error("adapter closed its output stream");
    }
    buffer_.append(chunk, static_cast<std::size_t>(n));
  }
}

}  // namespace detkit
