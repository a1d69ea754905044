#include <fstream>
#include <sstream>

#include "lgcpflow/amortizer.hpp"
#include "lgcpflow/errors.hpp"
#include "text_format.hpp"

namespace lgcpflow {

namespace {

BankRecord simulate_record(std::size_t index, const DomainMask& mask, const SummaryConfig& config,
                           const PriorBox& box, std::uint64_t seed, const BankOptions& options) {
  Rng rng = make_rng(seed, index);
  for (int attempt = 0;; ++attempt) {
    const ThetaParams theta = sample_prior(box, rng);
    const std::uint64_t sim_seed = rng();
    try {
      const PointPattern pattern = simulate_lgcp(theta, mask, sim_seed, options.count_cap);
      return BankRecord{theta, compose_summary(pattern, config).values};
    } catch (const ResourceError&) {
      if (attempt >= options.retry_cap) throw;
    }
  }
}

void check_bank_args(std::size_t n_sims, const DomainMask& mask, const SummaryConfig& config) {
  if (n_sims < 2) throw DomainError("a simulation bank needs at least two records");
  config.validate();
  if (mask.dim() != config.dim) throw DomainError("mask and summary config dimensions differ");
}

BankMeta make_meta(const DomainMask& mask, const SummaryConfig& config, std::uint64_t seed) {
  return BankMeta{config, mask.window().grid, seed, mask.admissible_area(), false};
}

}  // namespace

SimulationBank build_bank(std::size_t n_sims, const DomainMask& mask, const SummaryConfig& config,
                          std::uint64_t seed, const BankOptions& options) {
  check_bank_args(n_sims, mask, config);
  const PriorBox box = PriorBox::for_window_measure(mask.window().measure());
  SimulationBank bank{make_meta(mask, config, seed), std::vector<BankRecord>(n_sims)};
  std::string failure;
  const auto count = static_cast<long>(n_sims);
#pragma omp parallel for schedule(dynamic, 4)
  for (long i = 0; i < count; ++i) {
    try {
      bank.records[static_cast<std::size_t>(i)] =
          simulate_record(static_cast<std::size_t>(i), mask, config, box, seed, options);
    } catch (const std::exception& e) {
#pragma omp critical
      if (failure.empty()) failure = "record " + std::to_string(i) + ": " + e.what();
    }
  }
  if (!failure.empty()) throw ResourceError("bank simulation failed at " + failure);
  return bank;
}

namespace reference {

SimulationBank build_bank(std::size_t n_sims, const DomainMask& mask, const SummaryConfig& config,
                          std::uint64_t seed, const BankOptions& options) {
  check_bank_args(n_sims, mask, config);
  const PriorBox box = PriorBox::for_window_measure(mask.window().measure());
  SimulationBank bank{make_meta(mask, config, seed), {}};
  for (std::size_t i = 0; i < n_sims; ++i) bank.records.push_back(simulate_record(i, mask, config, box, seed, options));
  return bank;
}

}  // namespace reference

void SimulationBank::validate() const {
  if (records.empty()) throw DomainError("simulation bank is empty");
  const std::size_t len = meta.config.length();
  const PriorBox box = PriorBox::for_window_measure(1.0);
  for (const auto& r : records) {
    if (r.summary.size() != len) throw FormatError("bank summary length differs from its config");
    if (!box.strictly_contains(r.theta)) throw FormatError("bank theta outside the prior box");
  }
}

void SimulationBank::write(std::ostream& out) const {
  const SummaryConfig& c = meta.config;
  std::ostringstream q;
  for (std::size_t i = 0; i < c.q_list.size(); ++i) q << (i ? "," : "") << c.q_list[i];
  out << "# lgcpflow-bank version=1 dim=" << c.dim << " grid=" << meta.grid << " m=" << c.m
      << " r_max=" << detail::format_double(c.r_max) << " q=" << q.str() << " seed=" << meta.seed
      << " area=" << detail::format_double(meta.admissible_area) << " standardized=" << (meta.standardized ? 1 : 0)
      << " n=" << records.size() << '\n';
  out << "mu,rho,sigma2";
  for (std::size_t k = 0; k < c.length(); ++k) out << ",s" << k;
  out << '\n';
  for (const auto& r : records) {
    out << detail::format_double(r.theta.mu) << ',' << detail::format_double(r.theta.rho) << ','
        << detail::format_double(r.theta.sigma2);
    for (double v : r.summary) out << ',' << detail::format_double(v);
    out << '\n';
  }
}

SimulationBank SimulationBank::read(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line.rfind("# lgcpflow-bank", 0) != 0) throw FormatError("not a bank file");
  detail::KeyValues kv;
  for (const auto& tok : detail::split(line.substr(15), ' ')) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw FormatError("bad bank manifest token '" + tok + "'");
    kv.set(tok.substr(0, eq), tok.substr(eq + 1));
  }
  if (kv.get("version") != "1") throw FormatError("unsupported bank version " + kv.get("version"));
  SimulationBank bank;
  bank.meta.config.dim = detail::parse_integer<int>(kv.get("dim"));
  bank.meta.config.m = detail::parse_integer<int>(kv.get("m"));
  bank.meta.config.r_max = detail::parse_double(kv.get("r_max"));
  bank.meta.config.q_list = detail::parse_ints(kv.get("q"), ',');
  bank.meta.grid = detail::parse_integer<int>(kv.get("grid"));
  bank.meta.seed = detail::parse_integer<std::uint64_t>(kv.get("seed"));
  bank.meta.admissible_area = detail::parse_double(kv.get("area"));
  bank.meta.standardized = kv.get("standardized") == "1";
  try {
    bank.meta.config.validate();
  } catch (const DomainError& e) {
    throw FormatError(std::string("bank manifest: ") + e.what());
  }
  const auto n = detail::parse_integer<std::size_t>(kv.get("n"));
  const std::size_t len = bank.meta.config.length();

  if (!std::getline(in, line)) throw FormatError("bank file lacks a header row");
  bank.records.reserve(n);
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const std::vector<double> v = detail::parse_doubles(line, ',');
    if (v.size() != 3 + len) throw FormatError("bank record has " + std::to_string(v.size()) + " fields");
    BankRecord r{ThetaParams{v[0], v[1], v[2], Coords::constrained}, std::vector<double>(v.begin() + 3, v.end())};
    bank.records.push_back(std::move(r));
  }
  if (bank.records.size() != n) throw FormatError("bank declares " + std::to_string(n) + " records, found " +
                                                  std::to_string(bank.records.size()));
  return bank;
}

void SimulationBank::write_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write " + path);
  write(out);
}

SimulationBank SimulationBank::read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open bank file " + path);
  return read(in);
}

}  // namespace lgcpflow
