#include "rmfn/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>

#include "rmfn/error.hpp"
#include "rmfn/rng.hpp"

namespace fs = std::filesystem;

namespace rmfn {
namespace {

// Smoothstep-interpolated lattice noise in [-1, 1].
std::vector<double> value_noise(Rng& rng, long side, long cell) {
  const long lattice = side / cell + 2;
  std::vector<double> knots(static_cast<std::size_t>(lattice * lattice));
  for (auto& k : knots) k = rng.uniform(-1.0, 1.0);
  auto knot = [&](long gy, long gx) { return knots[static_cast<std::size_t>(gy * lattice + gx)]; };
  auto smooth = [](double t) { return t * t * (3.0 - 2.0 * t); };
  std::vector<double> out(static_cast<std::size_t>(side * side));
  for (long y = 0; y < side; ++y) {
    const double fy = (static_cast<double>(y) + 0.5) / static_cast<double>(cell);
    const long gy = static_cast<long>(fy);
    const double ty = smooth(fy - static_cast<double>(gy));
    for (long x = 0; x < side; ++x) {
      const double fx = (static_cast<double>(x) + 0.5) / static_cast<double>(cell);
      const long gx = static_cast<long>(fx);
      const double tx = smooth(fx - static_cast<double>(gx));
      const double top = knot(gy, gx) + (knot(gy, gx + 1) - knot(gy, gx)) * tx;
      const double bottom = knot(gy + 1, gx) + (knot(gy + 1, gx + 1) - knot(gy + 1, gx)) * tx;
      out[static_cast<std::size_t>(y * side + x)] = top + (bottom - top) * ty;
    }
  }
  return out;
}

struct Ellipse {
  double cx, cy, a, b;
  bool contains(double x, double y) const {
    const double dx = (x - cx) / a, dy = (y - cy) / b;
    return dx * dx + dy * dy <= 1.0;
  }
};

// Union of two crossing ellipses that span the full box width and height,
// plus up to three interior lobes. The mask is clipped to the box, so its
// bounding box is exactly w x h.
std::vector<std::uint8_t> lesion_mask(Rng& rng, long side, long x0, long y0, long w, long h) {
  std::vector<Ellipse> parts;
  const double fx0 = static_cast<double>(x0), fy0 = static_cast<double>(y0);
  const double fw = static_cast<double>(w), fh = static_cast<double>(h);
  {
    const double b = std::max(1.0, rng.uniform(0.35, 0.7) * fh / 2.0);
    const double cy = std::floor(rng.uniform(fy0 + b, fy0 + fh - b)) + 0.5;
    parts.push_back({fx0 + fw / 2.0, cy, fw / 2.0, b});
  }
  {
    const double a = std::max(1.0, rng.uniform(0.35, 0.7) * fw / 2.0);
    const double cx = std::floor(rng.uniform(fx0 + a, fx0 + fw - a)) + 0.5;
    parts.push_back({cx, fy0 + fh / 2.0, a, fh / 2.0});
  }
  const long extra = rng.range(0, 3);
  for (long k = 0; k < extra; ++k) {
    const double cx = rng.uniform(fx0 + 0.25 * fw, fx0 + 0.75 * fw);
    const double cy = rng.uniform(fy0 + 0.25 * fh, fy0 + 0.75 * fh);
    const double a = std::max(1.0, rng.uniform(0.5, 1.0) * std::min(cx - fx0, fx0 + fw - cx));
    const double b = std::max(1.0, rng.uniform(0.5, 1.0) * std::min(cy - fy0, fy0 + fh - cy));
    parts.push_back({cx, cy, a, b});
  }
  std::vector<std::uint8_t> mask(static_cast<std::size_t>(side * side), 0);
  for (long y = y0; y < y0 + h; ++y)
    for (long x = x0; x < x0 + w; ++x) {
      const double px = static_cast<double>(x) + 0.5, py = static_cast<double>(y) + 0.5;
      if (std::any_of(parts.begin(), parts.end(), [&](const Ellipse& e) { return e.contains(px, py); }))
        mask[static_cast<std::size_t>(y * side + x)] = 255;
    }
  return mask;
}

std::uint8_t quantize(double v) { return static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::uint64_t parse_hex64(const std::string& s) {
  if (s.size() != 16) throw_format("manifest: bad hash '" + s + "'");
  try {
    return std::stoull(s, nullptr, 16);
  } catch (const std::exception&) {
    throw_format("manifest: bad hash '" + s + "'");
  }
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string sample_name(int label, std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%s_%05zu.pgm", label ? "pos" : "neg", index);
  return buf;
}

}  // namespace

void validate(const SynthSpec& s) {
  if (s.image_side < 8) throw_invalid("image_side must be at least 8");
  if (s.n_per_class < 1) throw_invalid("n_per_class must be positive");
  if (s.lesion_min < 2 || s.lesion_max < s.lesion_min) throw_invalid("lesion side range must satisfy 2 <= min <= max");
  if (s.lesion_max > s.image_side) throw_invalid("lesion_max exceeds image_side");
  if (s.noise_cell < 1) throw_invalid("noise_cell must be positive");
  if (!(s.contrast >= 0.0) || !(s.noise_amplitude >= 0.0) || !(s.grain >= 0.0) || !(s.lesion_texture >= 0.0))
    throw_invalid("contrast, noise amplitude, grain and lesion texture must be non-negative");
}

std::string to_string(Split s) { return s == Split::kTrain ? "train" : "test"; }

Split split_of(const SynthSpec& spec, std::size_t index) {
  const std::size_t n_test = spec.n_per_class / 5;
  return index < spec.n_per_class - n_test ? Split::kTrain : Split::kTest;
}

RenderedSample render_sample(const SynthSpec& spec, int label, std::size_t index) {
  validate(spec);
  if (label != 0 && label != 1) throw_invalid("label must be 0 or 1");
  Rng rng = Rng::stream(spec.seed, (label ? "pos:" : "neg:") + std::to_string(index));
  const long side = spec.image_side;
  const auto n = static_cast<std::size_t>(side * side);

  const std::vector<double> coarse = value_noise(rng, side, spec.noise_cell);
  const std::vector<double> fine = value_noise(rng, side, std::max<long>(1, spec.noise_cell / 2));
  std::vector<double> bg(n);
  for (std::size_t i = 0; i < n; ++i)
    bg[i] = 0.45 + spec.noise_amplitude * (coarse[i] + 0.5 * fine[i]) / 1.5 + spec.grain * rng.uniform(-1.0, 1.0);

  RenderedSample r;
  r.background = {static_cast<std::size_t>(side), static_cast<std::size_t>(side), std::vector<std::uint8_t>(n)};
  for (std::size_t i = 0; i < n; ++i) r.background.pixels[i] = quantize(bg[i]);
  r.image = r.background;
  r.mask = {r.background.width, r.background.height, std::vector<std::uint8_t>(n, 0)};
  if (label == 0) return r;

  const long w = rng.range(spec.lesion_min, spec.lesion_max);
  const long h = rng.range(spec.lesion_min, spec.lesion_max);
  const long x0 = rng.range(0, side - w);
  const long y0 = rng.range(0, side - h);
  r.mask.pixels = lesion_mask(rng, side, x0, y0, w, h);
  for (std::size_t i = 0; i < n; ++i) {
    const double jitter = rng.uniform(-1.0, 1.0);  // drawn everywhere to keep the stream layout fixed
    if (r.mask.pixels[i]) r.image.pixels[i] = quantize(bg[i] + spec.contrast * (1.0 + spec.lesion_texture * jitter));
  }
  return r;
}

std::string format_manifest(const DatasetManifest& m) {
  const SynthSpec& s = m.spec;
  std::string out = "# rmfn synthetic dataset manifest\n";
  out += "version=" + std::to_string(m.version) + "\n";
  out += "spec.image_side=" + std::to_string(s.image_side) + "\n";
  out += "spec.n_per_class=" + std::to_string(s.n_per_class) + "\n";
  out += "spec.lesion_min=" + std::to_string(s.lesion_min) + "\n";
  out += "spec.lesion_max=" + std::to_string(s.lesion_max) + "\n";
  out += "spec.noise_cell=" + std::to_string(s.noise_cell) + "\n";
  out += "spec.noise_amplitude=" + format_double(s.noise_amplitude) + "\n";
  out += "spec.grain=" + format_double(s.grain) + "\n";
  out += "spec.contrast=" + format_double(s.contrast) + "\n";
  out += "spec.lesion_texture=" + format_double(s.lesion_texture) + "\n";
  out += "spec.seed=" + std::to_string(s.seed) + "\n";
  out += "# path\tlabel\tsplit\thash\tmask_path\tmask_hash\n";
  for (const ManifestEntry& e : m.entries) {
    out += e.path + "\t" + std::to_string(e.label) + "\t" + to_string(e.split) + "\t" + hex64(e.hash) + "\t";
    out += e.mask_path.empty() ? "-\t-" : e.mask_path + "\t" + hex64(e.mask_hash);
    out += "\n";
  }
  return out;
}

DatasetManifest parse_manifest(const std::string& text) {
  DatasetManifest m;
  std::map<std::string, std::string> kv;
  std::istringstream is(text);
  std::size_t line_no = 0;
  for (std::string line; std::getline(is, line);) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    if (line.find('\t') == std::string::npos) {
      const auto eq = line.find('=');
      if (eq == std::string::npos) throw_format("manifest line " + std::to_string(line_no) + ": expected key=value");
      kv[line.substr(0, eq)] = line.substr(eq + 1);
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ls(line);
    for (std::string field; std::getline(ls, field, '\t');) f.push_back(field);
    if (f.size() != 6) throw_format("manifest line " + std::to_string(line_no) + ": expected 6 fields");
    ManifestEntry e;
    e.path = f[0];
    if (f[1] != "0" && f[1] != "1") throw_format("manifest line " + std::to_string(line_no) + ": label must be 0 or 1");
    e.label = f[1] == "1";
    if (f[2] == "train") e.split = Split::kTrain;
    else if (f[2] == "test") e.split = Split::kTest;
    else throw_format("manifest line " + std::to_string(line_no) + ": bad split '" + f[2] + "'");
    e.hash = parse_hex64(f[3]);
    if (f[4] != "-") {
      e.mask_path = f[4];
      e.mask_hash = parse_hex64(f[5]);
    }
    m.entries.push_back(std::move(e));
  }
  auto get = [&](const char* key) -> const std::string& {
    auto it = kv.find(key);
    if (it == kv.end()) throw_format(std::string("manifest lacks '") + key + "'");
    return it->second;
  };
  try {
    m.version = std::stoi(get("version"));
    SynthSpec& s = m.spec;
    s.image_side = std::stol(get("spec.image_side"));
    s.n_per_class = std::stoul(get("spec.n_per_class"));
    s.lesion_min = std::stol(get("spec.lesion_min"));
    s.lesion_max = std::stol(get("spec.lesion_max"));
    s.noise_cell = std::stol(get("spec.noise_cell"));
    s.noise_amplitude = std::stod(get("spec.noise_amplitude"));
    s.grain = std::stod(get("spec.grain"));
    s.contrast = std::stod(get("spec.contrast"));
    s.lesion_texture = std::stod(get("spec.lesion_texture"));
    s.seed = std::stoull(get("spec.seed"));
  } catch (const std::logic_error&) {
    throw_format("manifest has a malformed number");
  }
  if (m.version != 1) throw_format("unsupported manifest version " + std::to_string(m.version));
  return m;
}

DatasetManifest generate(const SynthSpec& spec, const std::string& out_dir) {
  validate(spec);
  std::error_code ec;
  fs::create_directories(fs::path(out_dir) / "images", ec);
  if (!ec) fs::create_directories(fs::path(out_dir) / "masks", ec);
  if (ec) throw_io("cannot create dataset directory " + out_dir + ": " + ec.message());

  DatasetManifest m;
  m.spec = spec;
  for (int label = 0; label <= 1; ++label) {
    for (std::size_t i = 0; i < spec.n_per_class; ++i) {
      const RenderedSample r = render_sample(spec, label, i);
      ManifestEntry e;
      e.label = label;
      e.split = split_of(spec, i);
      e.path = "images/" + sample_name(label, i);
      const std::string bytes = encode_pgm(r.image);
      write_file((fs::path(out_dir) / e.path).string(), bytes);
      e.hash = fnv1a64(bytes);
      if (label == 1) {
        e.mask_path = "masks/" + sample_name(label, i);
        const std::string mask_bytes = encode_pgm(r.mask);
        write_file((fs::path(out_dir) / e.mask_path).string(), mask_bytes);
        e.mask_hash = fnv1a64(mask_bytes);
      }
      m.entries.push_back(std::move(e));
    }
  }
  write_file((fs::path(out_dir) / kManifestName).string(), format_manifest(m));
  return m;
}

LoadedDataset load_dataset(const std::string& manifest_path, bool with_masks) {
  LoadedDataset d;
  d.manifest = parse_manifest(read_file(manifest_path));
  const fs::path root = fs::path(manifest_path).parent_path();
  const auto side = static_cast<std::size_t>(d.manifest.spec.image_side);
  auto read_checked = [&](const std::string& rel, std::uint64_t hash) {
    const std::string path = (root / rel).string();
    const std::string bytes = read_file(path);
    if (fnv1a64(bytes) != hash) throw_format(path + ": content hash mismatch");
    GrayImage img = decode_pgm(bytes, path);
    if (img.width != side || img.height != side)
      throw_format(path + ": expected " + std::to_string(side) + "x" + std::to_string(side) + " image");
    return img;
  };
  for (const ManifestEntry& e : d.manifest.entries) {
    LabeledImage sample{to_tensor(read_checked(e.path, e.hash)), e.label};
    SampleInfo info{e.path, {}};
    if (with_masks && !e.mask_path.empty()) info.mask = read_checked(e.mask_path, e.mask_hash);
    auto& samples = e.split == Split::kTrain ? d.train : d.test;
    auto& infos = e.split == Split::kTrain ? d.train_info : d.test_info;
    samples.push_back(std::move(sample));
    infos.push_back(std::move(info));
  }
  return d;
}

}  // namespace rmfn
