#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "padrl/trainer.hpp"

namespace padrl {

namespace {

constexpr char kMagic[8] = {'P', 'A', 'D', 'R', 'L', 'C', 'K', 'P'};

// Fixed little-endian encoding regardless of host byte order.
template <typename T>
void put(std::ostream& out, T value) {
  static_assert(std::is_trivially_copyable_v<T> && (sizeof(T) == 4 || sizeof(T) == 8));
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  const U bits = std::bit_cast<U>(value);
  char buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) buf[i] = static_cast<char>((bits >> (8 * i)) & 0xff);
  out.write(buf, sizeof buf);
}

template <typename T>
T take(std::istream& in) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  unsigned char buf[sizeof(T)];
  if (!in.read(reinterpret_cast<char*>(buf), sizeof buf)) throw std::runtime_error("checkpoint truncated");
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) bits |= static_cast<U>(buf[i]) << (8 * i);
  return std::bit_cast<T>(bits);
}

void put_policy(std::ostream& out, const PolicyParams& p) {
  const auto& s = p.shape();
  put<std::int32_t>(out, s.vocab_size);
  put<std::int32_t>(out, s.max_len);
  put<std::int32_t>(out, s.context_order);
  put<std::int32_t>(out, s.num_conditions);
  put<std::int32_t>(out, s.eos_token);
  put<std::uint64_t>(out, p.size());
  for (double v : p.data()) put<double>(out, v);
}

PolicyParams take_policy(std::istream& in) {
  PolicyShape s;
  s.vocab_size = take<std::int32_t>(in);
  s.max_len = take<std::int32_t>(in);
  s.context_order = take<std::int32_t>(in);
  s.num_conditions = take<std::int32_t>(in);
  s.eos_token = take<std::int32_t>(in);
  const auto n = take<std::uint64_t>(in);
  if (n > (std::uint64_t{1} << 32)) throw std::runtime_error("checkpoint policy too large");
  std::vector<double> logits(n);
  for (auto& v : logits) v = take<double>(in);
  return PolicyParams(s, std::move(logits));
}

}  // namespace

void write_checkpoint(std::ostream& out, const Checkpoint& c) {
  out.write(kMagic, sizeof kMagic);
  put<std::uint32_t>(out, Checkpoint::kFormatVersion);
  put<std::uint64_t>(out, c.config_hash);
  put<std::uint32_t>(out, c.stage_index);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(c.stage.size()));
  out.write(c.stage.data(), static_cast<std::streamsize>(c.stage.size()));
  put<std::int64_t>(out, c.step);
  put<std::uint64_t>(out, c.root_seed);
  put_policy(out, c.params);
  put_policy(out, c.reference);
  if (!out) throw std::runtime_error("failed to write checkpoint");
}

Checkpoint read_checkpoint(std::istream& in) {
  char magic[sizeof kMagic];
  if (!in.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw std::runtime_error("not a checkpoint file");
  const auto version = take<std::uint32_t>(in);
  if (version != Checkpoint::kFormatVersion)
    throw std::runtime_error("unsupported checkpoint format version " + std::to_string(version));
  Checkpoint c;
  c.config_hash = take<std::uint64_t>(in);
  c.stage_index = take<std::uint32_t>(in);
  const auto len = take<std::uint32_t>(in);
  if (len > 256) throw std::runtime_error("checkpoint stage name too long");
  c.stage.resize(len);
  if (!in.read(c.stage.data(), len)) throw std::runtime_error("checkpoint truncated");
  c.step = take<std::int64_t>(in);
  c.root_seed = take<std::uint64_t>(in);
  c.params = take_policy(in);
  c.reference = take_policy(in);
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
  write_checkpoint(out, ckpt);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  return read_checkpoint(in);
}

}  // namespace padrl
