#pragma once

#include <fstream>
#include <optional>
#include <string>

namespace odegrad {

// Append-only metrics CSV with one fixed schema across every experiment;
// metrics an experiment does not produce stay empty, never dropped. Values
// are written deterministically (%.17g), so identical runs produce identical
// bytes.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path);

  void row(const std::string& experiment, long iter, std::optional<double> loss,
           std::optional<long> nfe_f, std::optional<long> nfe_b,
           std::optional<double> rmse, std::optional<double> elapsed_ms);

  static const char* header() { return "experiment,iter,loss,nfe_f,nfe_b,rmse,elapsed_ms"; }

 private:
  std::ofstream os_;
};

}  // namespace odegrad
