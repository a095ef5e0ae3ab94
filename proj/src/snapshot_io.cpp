#include "nsstab/snapshot_io.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <sstream>

#include "nsstab/report_io.hpp"

namespace nsstab {

namespace {

constexpr char kMagic[8] = {'N', 'S', 'S', 'T', 'S', 'N', 'P', '1'};

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

template <class T>
void put(std::vector<std::uint8_t>& out, T v) {
  std::uint8_t b[sizeof(T)];
  std::memcpy(b, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(b, b + sizeof(T));
  out.insert(out.end(), b, b + sizeof(T));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b, std::size_t end) : b_(b), end_(end) {}
  template <class T>
  T get() {
    if (pos_ + sizeof(T) > end_) throw IntegrityError("snapshot: truncated record");
    std::uint8_t tmp[sizeof(T)];
    std::memcpy(tmp, b_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(tmp, tmp + sizeof(T));
    T v;
    std::memcpy(&v, tmp, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  [[nodiscard]] std::size_t pos() const { return pos_; }
  void skip(std::size_t n) { pos_ += n; }

 private:
  const std::vector<std::uint8_t>& b_;
  std::size_t end_;
  std::size_t pos_ = 0;
};

std::uint32_t crc(const std::uint8_t* p, std::size_t n) {
  uLong c = crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed in chunks.
  while (n > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(n, 1u << 30));
    c = crc32(c, p, chunk);
    p += chunk;
    n -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

std::vector<std::uint8_t> read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IntegrityError("snapshot: cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

std::vector<std::uint8_t> encode_state(const FlowState& s) {
  const SpectralField& u = s.u_bar;
  const PeriodicGrid& g = u.grid();
  std::vector<std::uint8_t> out(kMagic, kMagic + 8);
  put<double>(out, g.L);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(g.dim));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(g.N));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(u.components()));
  put<double>(out, s.t);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.role));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(s.mean.size()));
  for (double m : s.mean.value) put<double>(out, m);
  const PhysicalField p = transform_backward(u);
  for (double v : p.data) put<double>(out, v);
  put<std::uint32_t>(out, crc(out.data(), out.size()));
  return out;
}

FlowState decode_state(const std::vector<std::uint8_t>& b) {
  if (b.size() < 8 + 4 || std::memcmp(b.data(), kMagic, 8) != 0) throw IntegrityError("snapshot: bad magic");
  const std::size_t body = b.size() - 4;
  Reader tail(b, b.size());
  tail.skip(body);
  const auto stored = tail.get<std::uint32_t>();
  if (stored != crc(b.data(), body)) throw IntegrityError("snapshot: checksum mismatch");

  Reader r(b, body);
  r.skip(8);
  const double L = r.get<double>();
  const auto dim = r.get<std::uint32_t>();
  const auto N = r.get<std::uint32_t>();
  const auto comps = r.get<std::uint32_t>();
  const double t = r.get<double>();
  const auto role = r.get<std::uint32_t>();
  const auto nmean = r.get<std::uint32_t>();
  if ((dim != 2 && dim != 3) || N < 2 || N > 4096 || N % 2 != 0 || comps < 1 || comps > 9 || role > 2 ||
      nmean > 3 || !(L > 0.0))
    throw IntegrityError("snapshot: malformed header");
  MeanVector mean(nmean);
  for (std::uint32_t i = 0; i < nmean; ++i) mean[i] = r.get<double>();
  const PeriodicGrid grid(L, static_cast<int>(dim), static_cast<int>(N));
  PhysicalField p(grid, static_cast<int>(comps));
  if (body - r.pos() != p.data.size() * sizeof(double)) throw IntegrityError("snapshot: sample count mismatch");
  for (double& v : p.data) v = r.get<double>();

  FlowState s;
  s.t = t;
  s.role = static_cast<Role>(role);
  s.mean = std::move(mean);
  s.u_bar = transform_forward(p);
  if (nmean > 0) {
    s.u_bar.mark_mean_free(true);
    s.u_bar.mark_solenoidal(true);
  }
  return s;
}

void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

void write_state(const std::filesystem::path& path, const FlowState& state) {
  const std::vector<std::uint8_t> b = encode_state(state);
  write_file_atomic(path, std::string(b.begin(), b.end()));
}

FlowState read_state(const std::filesystem::path& path) { return decode_state(read_bytes(path)); }

void write_field(const std::filesystem::path& path, const SpectralField& field, double time) {
  FlowState s;
  s.t = time;
  s.u_bar = field;
  s.role = field.grid().dim == 2 ? Role::base2d : Role::full3d;
  write_state(path, s);
}

SpectralField read_field(const std::filesystem::path& path, double* time) {
  FlowState s = read_state(path);
  if (time) *time = s.t;
  return std::move(s.u_bar);
}

void write_trajectory(const std::filesystem::path& dir, const Trajectory& traj) {
  std::filesystem::create_directories(dir / "snapshots");
  nlohmann::json side;
  side["role"] = to_string(traj.role);
  side["nu"] = json_number(traj.nu);
  side["dt"] = json_number(traj.dt);
  side["measure_scale"] = json_number(traj.measure_scale);
  side["aborted"] = traj.aborted;
  if (traj.aborted) side["abort_reason"] = traj.abort_reason;
  nlohmann::json snaps = nlohmann::json::array();
  for (std::size_t i = 0; i < traj.snapshots.size(); ++i) {
    std::ostringstream name;
    name << "snapshots/" << std::setw(4) << std::setfill('0') << i << ".snap";
    write_state(dir / name.str(), traj.snapshots[i]);
    snaps.push_back({{"file", name.str()}, {"t", json_number(traj.snapshots[i].t)}});
  }
  side["snapshots"] = snaps;
  nlohmann::json times = nlohmann::json::array(), means = nlohmann::json::array();
  nlohmann::json norms = nlohmann::json::object();
  for (const NormSample& s : traj.samples) {
    times.push_back(json_number(s.t));
    nlohmann::json m = nlohmann::json::array();
    for (double v : s.mean.value) m.push_back(json_number(v));
    means.push_back(m);
  }
  auto series = [&](auto&& f) {
    nlohmann::json a = nlohmann::json::array();
    for (const NormSample& s : traj.samples) a.push_back(json_number(f(s)));
    return a;
  };
  norms["l2_sq"] = series([](const NormSample& s) { return s.h_sq[0]; });
  norms["h1_sq"] = series([](const NormSample& s) { return s.h_sq[1]; });
  norms["h2_sq"] = series([](const NormSample& s) { return s.h_sq[2]; });
  norms["grad_sq"] = series([](const NormSample& s) { return s.grad_sq; });
  norms["dt_sq"] = series([](const NormSample& s) { return s.dt_sq; });
  norms["gradp_sq"] = series([](const NormSample& s) { return s.gradp_sq; });
  side["times"] = times;
  side["means"] = means;
  side["norms"] = norms;
  write_file_atomic(dir / "trajectory.json", side.dump(2) + "\n");
}

}  // namespace nsstab
