#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "lgcpflow/pointproc.hpp"

namespace lgcpflow {

struct PosteriorDraws {
  std::vector<ThetaParams> draws;  // constrained
  std::string source;

  std::size_t size() const { return draws.size(); }
  std::vector<double> component(std::size_t k) const;
  ThetaParams mean() const;

  // CSV "iteration,mu,rho,sigma2".
  void write_csv(std::ostream& out) const;
  static PosteriorDraws read_csv(std::istream& in);
};

}  // namespace lgcpflow
