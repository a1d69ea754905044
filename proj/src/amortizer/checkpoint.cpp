#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>

#include "lgcpflow/amortizer.hpp"
#include "lgcpflow/errors.hpp"
#include "text_format.hpp"

namespace lgcpflow {

namespace detail {

std::uint64_t fnv1a64(const char* data, std::size_t n) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace detail

namespace {

constexpr char kMagic[4] = {'C', 'X', 'F', 'L'};

void put_u64(std::string& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(const std::string& in, std::size_t at) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + static_cast<std::size_t>(i)])) << (8 * i);
  return v;
}

std::string manifest_text(const Checkpoint& c) {
  const CheckpointManifest& m = c.manifest;
  const InnArchitecture& a = c.net.arch();
  std::ostringstream s;
  auto line = [&s](const std::string& k, const std::string& v) { s << k << " = " << v << '\n'; };
  line("encoding", "utf-8");
  line("version", std::to_string(m.version));
  line("dim", std::to_string(m.config.dim));
  line("grid", std::to_string(m.grid));
  line("summary.m", std::to_string(m.config.m));
  line("summary.r_max", detail::format_double(m.config.r_max));
  std::string q;
  for (std::size_t i = 0; i < m.config.q_list.size(); ++i) q += (i ? " " : "") + std::to_string(m.config.q_list[i]);
  line("summary.q", q);
  line("prior.lo", detail::join_doubles({m.prior.lo.begin(), m.prior.lo.end()}));
  line("prior.hi", detail::join_doubles({m.prior.hi.begin(), m.prior.hi.end()}));
  line("arch.dim", std::to_string(a.dim));
  line("arch.summary_dim", std::to_string(a.summary_dim));
  line("arch.blocks", std::to_string(a.n_blocks));
  line("arch.hidden", std::to_string(a.hidden));
  line("arch.clamp", detail::format_double(a.clamp));
  line("arch.seed", std::to_string(c.net.seed()));
  std::string perms;
  for (std::size_t k = 0; k < c.net.permutations().size(); ++k) {
    if (k) perms += ';';
    const auto& p = c.net.permutations()[k];
    for (std::size_t i = 0; i < p.size(); ++i) perms += (i ? "," : "") + std::to_string(p[i]);
  }
  line("arch.permutations", perms);
  line("standardized", m.standardized ? "1" : "0");
  line("standardizer.length", std::to_string(c.standardizer.size()));
  line("standardizer.means", detail::join_doubles(c.standardizer.means()));
  line("standardizer.sds", detail::join_doubles(c.standardizer.sds()));
  line("train.iterations", std::to_string(m.iterations));
  line("train.bank_seed", std::to_string(m.bank_seed));
  line("train.seed", std::to_string(m.train_seed));
  line("train.lr0", detail::format_double(m.lr0));
  line("weights.order", "block-major: s1 t1 s2 t2; per layer W row-major then b");
  line("weights.count", std::to_string(c.net.param_count()));
  return s.str();
}

detail::KeyValues parse_manifest(const std::string& text) {
  detail::KeyValues kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto eq = line.find(" = ");
    if (eq == std::string::npos) throw FormatError("bad manifest line '" + line + "'");
    kv.set(line.substr(0, eq), line.substr(eq + 3));
  }
  return kv;
}

}  // namespace

std::string serialize_checkpoint(const Checkpoint& c) {
  const std::string manifest = manifest_text(c);
  std::string out(kMagic, 4);
  put_u64(out, manifest.size());
  out += manifest;
  for (double w : c.net.params()) put_u64(out, std::bit_cast<std::uint64_t>(w));
  put_u64(out, detail::fnv1a64(out.data(), out.size()));
  return out;
}

Checkpoint deserialize_checkpoint(const std::string& bytes) {
  if (bytes.size() < 4 + 8 + 8 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw FormatError("not a checkpoint (bad magic)");
  const std::uint64_t stored = get_u64(bytes, bytes.size() - 8);
  if (detail::fnv1a64(bytes.data(), bytes.size() - 8) != stored) throw FormatError("checkpoint checksum mismatch");
  const std::uint64_t mlen = get_u64(bytes, 4);
  if (mlen > bytes.size() - 20) throw FormatError("checkpoint truncated in manifest");
  const detail::KeyValues kv = parse_manifest(bytes.substr(12, mlen));

  if (kv.get("encoding") != "utf-8") throw FormatError("unsupported manifest encoding");
  const int version = detail::parse_integer<int>(kv.get("version"));
  if (version != kCheckpointVersion) throw FormatError("unsupported checkpoint version " + std::to_string(version));

  Checkpoint c;
  CheckpointManifest& m = c.manifest;
  m.version = version;
  m.config.dim = detail::parse_integer<int>(kv.get("dim"));
  m.config.m = detail::parse_integer<int>(kv.get("summary.m"));
  m.config.r_max = detail::parse_double(kv.get("summary.r_max"));
  m.config.q_list = detail::parse_ints(kv.get("summary.q"), ' ');
  m.grid = detail::parse_integer<int>(kv.get("grid"));
  const auto lo = detail::parse_doubles(kv.get("prior.lo")), hi = detail::parse_doubles(kv.get("prior.hi"));
  if (lo.size() != 3 || hi.size() != 3) throw FormatError("prior bounds need three values");
  std::copy(lo.begin(), lo.end(), m.prior.lo.begin());
  std::copy(hi.begin(), hi.end(), m.prior.hi.begin());
  m.standardized = kv.get("standardized") == "1";
  m.iterations = detail::parse_integer<long>(kv.get("train.iterations"));
  m.bank_seed = detail::parse_integer<std::uint64_t>(kv.get("train.bank_seed"));
  m.train_seed = detail::parse_integer<std::uint64_t>(kv.get("train.seed"));
  m.lr0 = detail::parse_double(kv.get("train.lr0"));

  InnArchitecture a;
  a.dim = detail::parse_integer<int>(kv.get("arch.dim"));
  a.summary_dim = detail::parse_integer<int>(kv.get("arch.summary_dim"));
  a.n_blocks = detail::parse_integer<int>(kv.get("arch.blocks"));
  a.hidden = detail::parse_integer<int>(kv.get("arch.hidden"));
  a.clamp = detail::parse_double(kv.get("arch.clamp"));
  const auto arch_seed = detail::parse_integer<std::uint64_t>(kv.get("arch.seed"));
  std::vector<std::vector<int>> perms;
  for (const auto& p : detail::split(kv.get("arch.permutations"), ';')) perms.push_back(detail::parse_ints(p, ','));

  const auto slen = detail::parse_integer<std::size_t>(kv.get("standardizer.length"));
  auto means = detail::parse_doubles(kv.get("standardizer.means"));
  auto sds = detail::parse_doubles(kv.get("standardizer.sds"));
  if (means.size() != slen || sds.size() != slen) throw FormatError("standardizer arrays do not match declared length");

  const auto count = detail::parse_integer<std::size_t>(kv.get("weights.count"));
  const std::size_t wstart = 12 + mlen;
  if (bytes.size() != wstart + 8 * count + 8) throw FormatError("checkpoint weight section has the wrong size");
  std::vector<double> params(count);
  for (std::size_t i = 0; i < count; ++i) params[i] = std::bit_cast<double>(get_u64(bytes, wstart + 8 * i));

  try {
    m.config.validate();
    c.net = ConditionalInn(a, arch_seed, std::move(perms), std::move(params));
    c.standardizer = SummaryStandardizer(std::move(means), std::move(sds));
  } catch (const DomainError& e) {
    throw FormatError(std::string("inconsistent checkpoint: ") + e.what());
  }
  if (c.standardizer.size() != m.config.length() || static_cast<std::size_t>(a.summary_dim) != m.config.length())
    throw FormatError("checkpoint summary length disagrees with its config");
  return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError("cannot write checkpoint " + path);
  const std::string bytes = serialize_checkpoint(ckpt);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open checkpoint " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return deserialize_checkpoint(bytes);
}

}  // namespace lgcpflow
