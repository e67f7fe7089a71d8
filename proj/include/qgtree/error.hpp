#pragma once

#include <stdexcept>
#include <string>

namespace qgtree {

enum class Errc {
  parse,
  cycle,
  disconnected,
  nonpositive_length,
  root_pendant,
  duplicate_edge,
  unknown_vertex,
  unknown_edge,
  not_boundary_edge,
  single_edge,
  not_pendant,
  out_of_domain,
  invalid_potential,
  integrator_failure,
  estimator_unreliable,
  weyl_mismatch,
  refinement_failure,
  no_zero_found,
  budget_exceeded,
  invalid_argument,
  mesh_too_coarse,
  eigensolver_failure,
};

inline const char* to_string(Errc code) {
  switch (code) {
    case Errc::parse: return "parse error";
    case Errc::cycle: return "cycle detected";
    case Errc::disconnected: return "disconnected graph";
    case Errc::nonpositive_length: return "nonpositive length";
    case Errc::root_pendant: return "root is pendant";
    case Errc::duplicate_edge: return "duplicate edge id";
    case Errc::unknown_vertex: return "unknown vertex";
    case Errc::unknown_edge: return "unknown edge";
    case Errc::not_boundary_edge: return "not a boundary edge";
    case Errc::single_edge: return "single-edge tree";
    case Errc::not_pendant: return "vertex is not pendant";
    case Errc::out_of_domain: return "argument out of domain";
    case Errc::invalid_potential: return "invalid potential";
    case Errc::integrator_failure: return "integrator failed to converge";
    case Errc::estimator_unreliable: return "estimator unreliable";
    case Errc::weyl_mismatch: return "Weyl count mismatch";
    case Errc::refinement_failure: return "root refinement failed";
    case Errc::no_zero_found: return "no zero found";
    case Errc::budget_exceeded: return "iteration budget exceeded";
    case Errc::invalid_argument: return "invalid argument";
    case Errc::mesh_too_coarse: return "mesh too coarse";
    case Errc::eigensolver_failure: return "eigensolver failure";
  }
  return "unknown error";
}

/// Single exception type for the library; `code()` identifies the failure class.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& detail)
      : std::runtime_error(detail.empty() ? std::string(to_string(code))
                                          : std::string(to_string(code)) + ": " + detail),
        code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace qgtree
