// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>
#include <string_view>

#include "ctg/objectives/losses.hpp"

namespace ctg::train {

inline constexpr std::string_view kMetricsHeader =
    "step,phase,recon_nll,kl,vae,attr_c,attr_z,gen_total,disc_sup,disc_unsup,disc_total,kl_weight,tau";

// One CSV row per optimizer step. Quantities a phase does not compute are
// left empty; reals print with 17 significant digits.
std::string metrics_row(std::uint64_t step, std::string_view phase, const obj::LossReport& r);

class MetricsLog {
 public:
  // Rows are kept in memory only.
  MetricsLog();
  // Starts a fresh file, or with `resume_step` keeps the header and every
  // existing row whose step is at most resume_step.
  static MetricsLog open(const std::string& path, std::uint64_t resume_step = 0, bool resume = false);

  void append(std::uint64_t step, std::string_view phase, const obj::LossReport& r);
  std::uint64_t rows() const { return rows_; }
  // Everything written through this log, header included.
  const std::string& text() const { return text_; }

 private:
  std::unique_ptr<std::ofstream> file_;
  std::string text_;
  std::uint64_t rows_ = 0;
};

}  // namespace ctg::train
