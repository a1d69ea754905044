#include <istream>
#include <ostream>

#include "text_format.hpp"
#include "lgcpflow/errors.hpp"
#include "lgcpflow/posterior.hpp"

namespace lgcpflow {

std::vector<double> PosteriorDraws::component(std::size_t k) const {
  std::vector<double> out;
  out.reserve(draws.size());
  for (const auto& d : draws) out.push_back(d.as_array()[k]);
  return out;
}

ThetaParams PosteriorDraws::mean() const {
  if (draws.empty()) throw DomainError("posterior mean of an empty draw set");
  std::array<double, 3> s{};
  for (const auto& d : draws) {
    const auto v = d.as_array();
    for (std::size_t k = 0; k < 3; ++k) s[k] += v[k];
  }
  for (auto& v : s) v /= static_cast<double>(draws.size());
  return ThetaParams::from_array(s, Coords::constrained);
}

void PosteriorDraws::write_csv(std::ostream& out) const {
  out << "iteration,mu,rho,sigma2\n";
  for (std::size_t i = 0; i < draws.size(); ++i)
    out << i << ',' << detail::format_double(draws[i].mu) << ',' << detail::format_double(draws[i].rho) << ','
        << detail::format_double(draws[i].sigma2) << '\n';
}

PosteriorDraws PosteriorDraws::read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("iteration,mu,rho,sigma2", 0) != 0)
    throw FormatError("draws file must start with 'iteration,mu,rho,sigma2'");
  PosteriorDraws out;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    const auto v = detail::parse_doubles(line, ',');
    if (v.size() != 4) throw FormatError("draw rows need four columns");
    out.draws.push_back(ThetaParams{v[1], v[2], v[3], Coords::constrained});
  }
  return out;
}

}  // namespace lgcpflow
