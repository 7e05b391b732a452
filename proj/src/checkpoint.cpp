#include "dudf/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <sstream>
#include <vector>

namespace dudf {

static_assert(std::endian::native == std::endian::little, "checkpoints assume a little-endian host");

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path) {
  checkpoint.network.check();
  const std::vector<double> flat = flatten_parameters(checkpoint.network);
  std::vector<float> payload(flat.begin(), flat.end());

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  char header[256];
  std::snprintf(header, sizeof header, "DUDF1 %d %d %.17g %.17g %llu\n", checkpoint.network.hidden_layers(),
                checkpoint.network.width(), checkpoint.network.omega0, checkpoint.alpha.alpha(),
                static_cast<unsigned long long>(checkpoint.seed));
  out << header;
  out.write(reinterpret_cast<const char*>(payload.data()), static_cast<std::streamsize>(payload.size() * sizeof(float)));
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
  std::string header;
  if (!std::getline(in, header)) throw CheckpointError("checkpoint '" + path.string() + "' is empty");
  std::istringstream hs(header);
  std::string magic;
  int hidden = 0, width = 0;
  double omega0 = 0.0, alpha = 0.0;
  unsigned long long seed = 0;
  hs >> magic;
  if (magic != "DUDF1")
    throw CheckpointError("unrecognized checkpoint version in '" + path.string() + "' (expected DUDF1)");
  if (!(hs >> hidden >> width >> omega0 >> alpha >> seed) || hidden < 1 || width < 1)
    throw CheckpointError("malformed checkpoint header in '" + path.string() + "'");

  Checkpoint ck;
  ck.network = init_siren(hidden, width, omega0, 0);
  ck.alpha = ScalingParams(alpha);
  ck.seed = seed;

  const std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::size_t expected = ck.network.parameter_count() * sizeof(float);
  if (bytes.size() < expected)
    throw CheckpointError("checkpoint payload is truncated: expected " + std::to_string(expected) + " bytes, found " +
                          std::to_string(bytes.size()));
  if (bytes.size() > expected)
    throw CheckpointError("checkpoint payload does not match its dims: expected " + std::to_string(expected) +
                          " bytes, found " + std::to_string(bytes.size()));
  std::vector<float> payload(ck.network.parameter_count());
  std::memcpy(payload.data(), bytes.data(), expected);
  assign_parameters(ck.network, std::vector<double>(payload.begin(), payload.end()));
  ck.network.check();
  return ck;
}

SirenNetwork quantize_to_float(const SirenNetwork& net) {
  SirenNetwork out = net;
  std::vector<double> flat = flatten_parameters(net);
  for (double& v : flat) v = static_cast<float>(v);
  assign_parameters(out, flat);
  return out;
}

}  // namespace dudf
