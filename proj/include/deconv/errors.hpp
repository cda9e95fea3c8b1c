#pragma once

#include <stdexcept>
#include <string>

namespace deconv {

/// Base class of every exception thrown by this library.
class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument values: non-finite inputs, parameters outside their
/// mathematical domain (e.g. a non-positive variance).
class domain_error : public error {
 public:
  using error::error;
};

/// Violated structural preconditions: mismatched sizes, invalid schedules,
/// out-of-order grids.
class contract_error : public error {
 public:
  using error::error;
};

/// Unusable run configuration (bad config files, invalid option values).
class config_error : public error {
 public:
  using error::error;
};

/// Malformed input data (unparsable observation lines, missing files).
class data_error : public error {
 public:
  using error::error;
};

/// Floating-point degeneracy: a likelihood row that underflowed to zero,
/// or similar states where the arithmetic cannot proceed meaningfully.
class degenerate_error : public error {
 public:
  using error::error;
};

/// Checkpoint (de)serialization failure. The message names the reason
/// (bad magic, version mismatch, truncation, checksum).
class checkpoint_error : public error {
 public:
  using error::error;
};

/// The y-integration window failed to capture the predictive mass.
/// Carries the mass actually captured so callers can report it.
class window_mass_error : public config_error {
 public:
  window_mass_error(const std::string& what, double captured)
      : config_error(what), captured_mass_(captured) {}

  double captured_mass() const noexcept { return captured_mass_; }

 private:
  double captured_mass_;
};

}  // namespace deconv
