#pragma once
#include <stdexcept>
#include <string>

namespace metastab {

enum class errc {
  origin_outside,
  too_coarse,
  not_on_boundary,
  outside_domain,
  delta_too_large,
  side_condition_violated,
  margin_violated,
  non_monotone_stencil,
  linear_solve_failed,
  horizon_overflow,
  too_few_exits,
  too_few_paths,
  config_error,
};

inline const char* name(errc c) {
  switch (c) {
    case errc::origin_outside: return "OriginOutside";
    case errc::too_coarse: return "TooCoarse";
    case errc::not_on_boundary: return "NotOnBoundary";
    case errc::outside_domain: return "OutsideDomain";
    case errc::delta_too_large: return "DeltaTooLarge";
    case errc::side_condition_violated: return "SideConditionViolated";
    case errc::margin_violated: return "MarginViolated";
    case errc::non_monotone_stencil: return "NonMonotoneStencil";
    case errc::linear_solve_failed: return "LinearSolveFailed";
    case errc::horizon_overflow: return "HorizonOverflow";
    case errc::too_few_exits: return "TooFewExits";
    case errc::too_few_paths: return "TooFewPaths";
    case errc::config_error: return "ConfigError";
  }
  return "UnknownError";
}

class error : public std::runtime_error {
 public:
  error(errc c, const std::string& what)
      : std::runtime_error(std::string(name(c)) + ": " + what), code_(c) {}
  errc code() const noexcept { return code_; }

 private:
  errc code_;
};

}  // namespace metastab
