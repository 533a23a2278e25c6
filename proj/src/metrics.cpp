#include "odegrad/metrics.hpp"

#include <cstdio>
#include <stdexcept>

namespace odegrad {

MetricsWriter::MetricsWriter(const std::string& path) : os_(path) {
  if (!os_) throw std::runtime_error("MetricsWriter: cannot open " + path);
  os_ << header() << "\n";
}

void MetricsWriter::row(const std::string& experiment, long iter,
                        std::optional<double> loss, std::optional<long> nfe_f,
                        std::optional<long> nfe_b, std::optional<double> rmse,
                        std::optional<double> elapsed_ms) {
  char buf[64];
  auto put_double = [&](const std::optional<double>& v) {
    os_ << ",";
    if (v) {
      std::snprintf(buf, sizeof(buf), "%.17g", *v);
      os_ << buf;
    }
  };
  os_ << experiment << "," << iter;
  put_double(loss);
  os_ << ",";
  if (nfe_f) os_ << *nfe_f;
  os_ << ",";
  if (nfe_b) os_ << *nfe_b;
  put_double(rmse);
  put_double(elapsed_ms);
  os_ << "\n";
}

}  // namespace odegrad
