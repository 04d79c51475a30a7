// Copyright 2026 The bytheway Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "btw/attention.hpp"
#include "btw/errors.hpp"

namespace btw {

namespace defaults {
/// Largest tolerated imaginary residue when inverting a spectrum that should
/// be conjugate-symmetric.
inline constexpr double symmetry_tol = 1e-6;
}  // namespace defaults

/// Frequency band straddling the Nyquist bin. With F frames and radius tau,
/// bins [F/2 - tau, F/2 + tau] inclusive are "high" and the rest, DC
/// included, are "low". The band is symmetric about F/2, so scaling it keeps
/// real signals real.
class BandMask {
 public:
  BandMask(std::size_t frames, std::size_t tau) : frames_(frames), tau_(tau) {
    if (frames < 2 || frames % 2 != 0)
      throw ParamError("band mask requires an even frame count, got " + std::to_string(frames));
    if (tau < 1 || tau > frames / 2 - 1)
      throw ParamError("tau must be in [1, " + std::to_string(frames / 2 - 1) + "] for " +
                       std::to_string(frames) + " frames, got " + std::to_string(tau));
  }

  std::size_t frames() const { return frames_; }
  std::size_t tau() const { return tau_; }
  std::size_t high_count() const { return 2 * tau_ + 1; }

  bool is_high(std::size_t k) const {
    const std::size_t half = frames_ / 2;
    return k + tau_ >= half && k <= half + tau_;
  }

 private:
  std::size_t frames_;
  std::size_t tau_;
};

/// Per-row discrete spectra of an attention batch: for each site, F rows of
/// F complex bins in the same layout as the time-domain maps.
class SpectrumBatch {
 public:
  SpectrumBatch(std::vector<std::complex<double>> data, SpatialDims spatial, std::size_t frames)
      : data_(std::move(data)), spatial_(spatial), frames_(frames) {
    if (data_.size() != spatial_.sites() * frames_ * frames_)
      throw ShapeError("spectrum payload size " + std::to_string(data_.size()) +
                       " does not match " + std::to_string(spatial_.sites()) + " sites of " +
                       std::to_string(frames_) + "x" + std::to_string(frames_) + " bins");
  }

  std::size_t sites() const { return spatial_.sites(); }
  std::size_t frames() const { return frames_; }
  const SpatialDims& spatial() const { return spatial_; }

  std::span<std::complex<double>> row(std::size_t site, std::size_t i) {
    return {data_.data() + (site * frames_ + i) * frames_, frames_};
  }
  std::span<const std::complex<double>> row(std::size_t site, std::size_t i) const {
    return {data_.data() + (site * frames_ + i) * frames_, frames_};
  }
  std::span<std::complex<double>> values() { return data_; }
  std::span<const std::complex<double>> values() const { return data_; }

 private:
  std::vector<std::complex<double>> data_;
  SpatialDims spatial_;
  std::size_t frames_;
};

namespace detail {

// Full F x F unit-root tables, re[k*F + n] + i*im[k*F + n] =
// exp(-2*pi*i*k*n / F). Row k is contiguous, so the transform inner loops
// are plain dot products; the few kilobytes stay cache-resident.
struct Twiddles {
  std::vector<double> re;
  std::vector<double> im;
};

inline Twiddles twiddles(std::size_t frames) {
  std::vector<double> base_re(frames), base_im(frames);
  for (std::size_t m = 0; m < frames; ++m) {
    const double angle =
        -2.0 * std::numbers::pi * static_cast<double>(m) / static_cast<double>(frames);
    base_re[m] = std::cos(angle);
    base_im[m] = std::sin(angle);
  }
  Twiddles w{std::vector<double>(frames * frames), std::vector<double>(frames * frames)};
  for (std::size_t k = 0; k < frames; ++k) {
    std::size_t m = 0;
    for (std::size_t n = 0; n < frames; ++n) {
      w.re[k * frames + n] = base_re[m];
      w.im[k * frames + n] = base_im[m];
      m += k;
      if (m >= frames) m -= frames;
    }
  }
  return w;
}

}  // namespace detail

/// Forward transform of every attention row, X[k] = sum_n x[n] e^(-2*pi*i*k*n/F).
inline SpectrumBatch dft_rows(const AttnMapBatch& batch) {
  const std::size_t frames = batch.frames();
  const std::size_t per_site = frames * frames;
  const detail::Twiddles w = detail::twiddles(frames);
  const double* wr = w.re.data();
  const double* wi = w.im.data();

  std::vector<std::complex<double>> out(batch.sites() * per_site);
  const auto vals = batch.values();
  detail::parallel_for(batch.sites(), 4096 / (per_site * frames) + 1,
                       [&](std::size_t begin, std::size_t end) {
    for (std::size_t site = begin; site < end; ++site) {
      for (std::size_t i = 0; i < frames; ++i) {
        const double* x = vals.data() + (site * frames + i) * frames;
        std::complex<double>* X = out.data() + (site * frames + i) * frames;
        for (std::size_t k = 0; k < frames; ++k) {
          const double* row_re = wr + k * frames;
          const double* row_im = wi + k * frames;
          double acc_re = 0.0, acc_im = 0.0;
          for (std::size_t n = 0; n < frames; ++n) {
            acc_re += x[n] * row_re[n];
            acc_im += x[n] * row_im[n];
          }
          X[k] = {acc_re, acc_im};
        }
      }
    }
  });
  return SpectrumBatch(std::move(out), batch.spatial(), frames);
}

/// Inverse transform back to real maps, x[n] = (1/F) sum_k X[k] e^(2*pi*i*k*n/F).
/// The spectrum must describe a real signal; any entry whose imaginary
/// residue exceeds `symmetry_tol` raises SymmetryError. The result is
/// returned unvalidated with its stochastic flag cleared.
inline AttnMapBatch idft_rows(const SpectrumBatch& spectrum,
                              double symmetry_tol = defaults::symmetry_tol) {
  const std::size_t frames = spectrum.frames();
  const std::size_t per_site = frames * frames;
  const detail::Twiddles w = detail::twiddles(frames);
  const double* wr = w.re.data();
  const double* wi = w.im.data();  // conjugated below via sign flip
  const double inv_frames = 1.0 / static_cast<double>(frames);

  std::vector<double> out(spectrum.sites() * per_site);
  std::vector<double> worst(spectrum.sites(), 0.0);
  const auto bins = spectrum.values();
  detail::parallel_for(spectrum.sites(), 4096 / (per_site * frames) + 1,
                       [&](std::size_t begin, std::size_t end) {
    for (std::size_t site = begin; site < end; ++site) {
      double site_worst = 0.0;
      for (std::size_t i = 0; i < frames; ++i) {
        const std::complex<double>* X = bins.data() + (site * frames + i) * frames;
        double* x = out.data() + (site * frames + i) * frames;
        for (std::size_t n = 0; n < frames; ++n) {
          const double* row_re = wr + n * frames;
          const double* row_im = wi + n * frames;
          double acc_re = 0.0, acc_im = 0.0;
          for (std::size_t k = 0; k < frames; ++k) {
            const double xr = X[k].real();
            const double xi = X[k].imag();
            acc_re += xr * row_re[k] + xi * row_im[k];
            acc_im += xi * row_re[k] - xr * row_im[k];
          }
          site_worst = std::max(site_worst, std::abs(acc_im * inv_frames));
          x[n] = acc_re * inv_frames;
        }
      }
      worst[site] = site_worst;
    }
  });
  double max_imag = 0.0;
  for (const double v : worst) max_imag = std::max(max_imag, v);
  if (max_imag > symmetry_tol)
    throw SymmetryError("inverse transform produced imaginary residue " +
                        std::to_string(max_imag) + " above tolerance " +
                        std::to_string(symmetry_tol));
  return AttnMapBatch(std::move(out), spectrum.spatial(), frames, false);
}

/// Splits map energy into the masked high band and its complement. Totals
/// are computed in the time domain; the high share comes from row spectra,
/// so total = high + low holds only up to rounding.
inline EnergyReport band_energies(const AttnMapBatch& batch, const BandMask& mask) {
  if (mask.frames() != batch.frames())
    throw ShapeError("band mask built for " + std::to_string(mask.frames()) +
                     " frames applied to " + std::to_string(batch.frames()));
  const std::size_t frames = batch.frames();
  const SpectrumBatch spectrum = dft_rows(batch);
  const double inv_ff = 1.0 / static_cast<double>(frames * frames);

  std::vector<double> high_per_site(batch.sites());
  detail::parallel_for(batch.sites(), 4096 / (frames * frames) + 1,
                       [&](std::size_t begin, std::size_t end) {
    for (std::size_t site = begin; site < end; ++site) {
      double acc = 0.0;
      for (std::size_t i = 0; i < frames; ++i) {
        const auto X = spectrum.row(site, i);
        for (std::size_t k = 0; k < frames; ++k)
          if (mask.is_high(k)) acc += std::norm(X[k]);
      }
      high_per_site[site] = acc * inv_ff;
    }
  });

  EnergyReport report;
  report.total = energy(batch);
  report.high = detail::pairwise_sum(high_per_site) / static_cast<double>(batch.sites());
  report.low = report.total - report.high;
  return report;
}

/// Amplifies the masked band of every row by `beta` and transforms back:
/// ~A = iDFT(beta * X_H + X_L). DC sits outside the band, so row sums are
/// preserved; entries may still leave [0, 1], and the result carries
/// stochastic = false.
inline AttnMapBatch scale_high(const AttnMapBatch& batch, double beta, const BandMask& mask) {
  if (mask.frames() != batch.frames())
    throw ShapeError("band mask built for " + std::to_string(mask.frames()) +
                     " frames applied to " + std::to_string(batch.frames()));
  if (!std::isfinite(beta) || beta < 0.0)
    throw ParamError("beta must be finite and non-negative, got " + std::to_string(beta));

  SpectrumBatch spectrum = dft_rows(batch);
  const std::size_t frames = batch.frames();
  auto bins = spectrum.values();
  detail::parallel_for(batch.sites(), 4096 / (frames * frames) + 1,
                       [&](std::size_t begin, std::size_t end) {
    for (std::size_t site = begin; site < end; ++site)
      for (std::size_t i = 0; i < frames; ++i) {
        std::complex<double>* X = bins.data() + (site * frames + i) * frames;
        for (std::size_t k = 0; k < frames; ++k)
          if (mask.is_high(k)) X[k] *= beta;
      }
  });
  return idft_rows(spectrum);
}

/// The band-only part of each map: iDFT of the spectrum with everything
/// outside the mask zeroed. Subtracting it from the input leaves the
/// low-pass component.
inline AttnMapBatch high_band_component(const AttnMapBatch& batch, const BandMask& mask) {
  if (mask.frames() != batch.frames())
    throw ShapeError("band mask built for " + std::to_string(mask.frames()) +
                     " frames applied to " + std::to_string(batch.frames()));
  SpectrumBatch spectrum = dft_rows(batch);
  const std::size_t frames = batch.frames();
  auto bins = spectrum.values();
  detail::parallel_for(batch.sites(), 4096 / (frames * frames) + 1,
                       [&](std::size_t begin, std::size_t end) {
    for (std::size_t site = begin; site < end; ++site)
      for (std::size_t i = 0; i < frames; ++i) {
        std::complex<double>* X = bins.data() + (site * frames + i) * frames;
        for (std::size_t k = 0; k < frames; ++k)
          if (!mask.is_high(k)) X[k] = {0.0, 0.0};
      }
  });
  return idft_rows(spectrum);
}

/// Smallest band gain that lifts the post-guidance energy back to the
/// pre-guidance level: sqrt((e1 - e2_low) / e2_high) when that ratio is
/// positive, otherwise 0 (no lift needed or possible).
inline double critical_beta(double e1, double e2_high, double e2_low) {
  if (!(std::isfinite(e1) && std::isfinite(e2_high) && std::isfinite(e2_low)))
    throw ParamError("critical_beta requires finite energies");
  if (e2_high < 0.0 || e2_low < 0.0)
    throw ParamError("band energies must be non-negative");
  if (e2_high == 0.0) return 0.0;
  const double radicand = (e1 - e2_low) / e2_high;
  if (radicand <= 0.0) return 0.0;
  return std::sqrt(radicand);
}

/// Floor-clamped adaptive gain: max(beta0, critical_beta(e1, e2_high, e2_low)).
inline double adaptive_beta(double e1, double e2_high, double e2_low, double beta0) {
  if (!std::isfinite(beta0) || beta0 <= 0.0)
    throw ParamError("beta0 must be finite and > 0, got " + std::to_string(beta0));
  return std::max(beta0, critical_beta(e1, e2_high, e2_low));
}

}  // namespace btw
