// SPDX-License-Identifier: Apache-2.0
#include "ctg/trainer/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include "ctg/util/kv.hpp"

namespace ctg::train {

std::string metrics_row(std::uint64_t step, std::string_view phase, const obj::LossReport& r) {
  std::string row = std::to_string(step) + "," + std::string(phase);
  for (double v : {r.recon_nll, r.kl, r.vae, r.attr_c, r.attr_z, r.gen_total, r.disc_sup, r.disc_unsup, r.disc_total,
                   r.kl_weight, r.tau}) {
    row += ",";
    if (!std::isnan(v)) {
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      row += buf;
    }
  }
  return row;
}

MetricsLog::MetricsLog() : text_(std::string(kMetricsHeader) + "\n") {}

MetricsLog MetricsLog::open(const std::string& path, std::uint64_t resume_step, bool resume) {
  MetricsLog log;
  if (resume) {
    std::string kept;
    std::istringstream in(util::read_file(path));
    std::string line;
    bool header = true;
    while (std::getline(in, line)) {
      if (header) {
        if (line != kMetricsHeader) throw std::runtime_error(path + ": not a metrics file");
        header = false;
        continue;
      }
      if (std::stoull(line.substr(0, line.find(','))) > resume_step) break;
      kept += line + "\n";
      ++log.rows_;
    }
    log.text_ += kept;
  }
  log.file_ = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
  if (!*log.file_) throw std::runtime_error("cannot write metrics file " + path);
  *log.file_ << log.text_;
  log.file_->flush();
  return log;
}

void MetricsLog::append(std::uint64_t step, std::string_view phase, const obj::LossReport& r) {
  const auto row = metrics_row(step, phase, r) + "\n";
  text_ += row;
  ++rows_;
  if (file_) {
    *file_ << row;
    file_->flush();
  }
}

}  // namespace ctg::train
