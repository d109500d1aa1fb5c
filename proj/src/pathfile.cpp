#include "spde/pathfile.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <vector>

#include "spde/util.hpp"
#include "json.hpp"

static_assert(std::endian::native == std::endian::little,
              "path files are little-endian; this build targets little-endian hosts");

namespace spde {

namespace {

// header layout, 36 bytes packed by hand (no struct padding games)
//   int32 dim, int32 K, float64 dt, int64 n_steps, int32 n_modes, uint64 seed
constexpr std::size_t kHeaderBytes = 4 + 4 + 8 + 8 + 4 + 8;

template <class T>
void put(std::string& buf, T v) {
  buf.append(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T pull(const char*& p) {
  T v;
  std::memcpy(&v, p, sizeof v);
  p += sizeof v;
  return v;
}

}  // namespace

void write_path(const NoisePath& path, const std::string& file, std::int64_t n_steps) {
  if (!(path.dt() > 0.0)) fail("write_path: path is empty");
  if (n_steps <= 0) n_steps = path.n_steps();
  if (n_steps <= 0) fail("write_path: nothing to write, horizon is empty");
  if (path.origin() < 0) fail("write_path: negative time origins are not representable");
  const NoiseBasis& nb = path.basis();

  std::string head;
  head.reserve(kHeaderBytes);
  put<std::int32_t>(head, nb.dim);
  put<std::int32_t>(head, nb.cutoff);
  put<double>(head, path.dt());
  put<std::int64_t>(head, n_steps);
  put<std::int32_t>(head, nb.n_modes());
  put<std::uint64_t>(head, path.seed());

  std::ofstream out(file, std::ios::binary);
  if (!out) fail("write_path: cannot open '" + file + "'");
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  std::vector<double> row(static_cast<std::size_t>(n_steps));
  for (int j = 0; j < nb.n_modes(); ++j)
    for (int c = 0; c < nb.dim; ++c) {
      for (std::int64_t n = 0; n < n_steps; ++n)
        row[static_cast<std::size_t>(n)] = path.increment(j, c, n);
      out.write(reinterpret_cast<const char*>(row.data()),
                static_cast<std::streamsize>(row.size() * sizeof(double)));
    }
  if (!out) fail("write_path: short write to '" + file + "'");
  out.close();

  nlohmann::json side{{"rule", nb.rule},
                      {"amplitude", nb.amplitude},
                      {"gamma", nb.gamma},
                      {"origin", path.origin()}};
  std::ofstream sc(file + ".json");
  if (!sc) fail("write_path: cannot open sidecar '" + file + ".json'");
  sc << side.dump(2) << "\n";
  if (!sc) fail("write_path: short write to sidecar");
}

NoisePath load_path(const std::string& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail("load_path: cannot open '" + file + "'");
  std::string head(kHeaderBytes, '\0');
  in.read(head.data(), static_cast<std::streamsize>(kHeaderBytes));
  if (in.gcount() != static_cast<std::streamsize>(kHeaderBytes))
    fail("load_path: '" + file + "' is too short for a path header");
  const char* p = head.data();
  auto dim = pull<std::int32_t>(p);
  auto cutoff = pull<std::int32_t>(p);
  auto dt = pull<double>(p);
  auto n_steps = pull<std::int64_t>(p);
  auto n_modes = pull<std::int32_t>(p);
  auto seed = pull<std::uint64_t>(p);
  if (dim < 1 || dim > 2 || cutoff < 0 || !(dt > 0.0) || n_steps <= 0 || n_modes < 0)
    fail("load_path: '" + file + "' carries an implausible header");

  std::ifstream sc(file + ".json");
  if (!sc) fail("load_path: missing sidecar '" + file + ".json'");
  nlohmann::json side;
  try {
    std::stringstream buf;
    buf << sc.rdbuf();
    side = nlohmann::json::parse(buf.str());
  } catch (const nlohmann::json::exception& e) {
    fail(std::string("load_path: bad sidecar (") + e.what() + ")");
  }
  if (!side.contains("rule") || !side.contains("amplitude"))
    fail("load_path: sidecar lacks the amplitude rule");
  std::string rule = side["rule"].get<std::string>();
  double amplitude = side["amplitude"].get<double>();
  double gamma = side.value("gamma", 0.0);
  std::int64_t origin = side.value("origin", std::int64_t{0});

  NoiseBasis nb = build_basis(dim, cutoff, rule, amplitude, gamma);
  if (nb.n_modes() != n_modes)
    fail("load_path: header says " + std::to_string(n_modes) + " modes but the rule '" + rule +
         "' with K = " + std::to_string(cutoff) + " enumerates " + std::to_string(nb.n_modes()));

  std::size_t count = static_cast<std::size_t>(n_steps) * nb.n_modes() * dim;
  auto buf = std::make_shared<std::vector<double>>(count);
  in.read(reinterpret_cast<char*>(buf->data()),
          static_cast<std::streamsize>(count * sizeof(double)));
  if (in.gcount() != static_cast<std::streamsize>(count * sizeof(double)))
    fail("load_path: '" + file + "' is truncated (header promises " + std::to_string(n_steps) +
         " steps x " + std::to_string(nb.n_modes() * dim) + " streams)");

  // the buffer holds absolute steps [origin, origin + n_steps); rebuild a
  // fresh path and shift it so its time origin matches the recorded one
  NoisePath path(nb, dt, n_steps + origin, seed);
  path.attach_buffer(std::move(buf), origin, n_steps);
  if (origin != 0) path = shift_path(path, origin * dt);
  return path;
}

}  // namespace spde
