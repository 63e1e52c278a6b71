#include "fploc/annf.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <chrono>
#include <cstring>
#include <limits>
#include <random>
#include <sstream>

#include <zlib.h>

namespace fploc {
namespace {

constexpr char kMagic[4] = {'A', 'N', 'N', 'F'};

class Writer {
 public:
  template <class T>
  void put(T v) {
    static_assert(std::is_trivially_copyable_v<T>);
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, &v, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    out.append(reinterpret_cast<const char*>(buf), sizeof(T));
  }
  std::string out;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  template <class T>
  T get() {
    if (pos_ + sizeof(T) > in_.size()) throw FormatError("ANNF data truncated");
    unsigned char buf[sizeof(T)];
    std::memcpy(buf, in_.data() + pos_, sizeof(T));
    if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
    pos_ += sizeof(T);
    T v;
    std::memcpy(&v, buf, sizeof(T));
    return v;
  }
  std::size_t pos() const { return pos_; }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(std::string_view data) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(data.data()), static_cast<uInt>(data.size())));
}

}  // namespace

ElementPair nearest_pair(const FloorPlan& plan, const Vec2& point) {
  constexpr double kInf = std::numeric_limits<double>::infinity();
  double d0 = kInf, d1 = kInf;
  ElementId e0 = 0, e1 = 0;
  const auto& elements = plan.elements();
  for (ElementId id = 0; id < elements.size(); ++id) {
    const double d = closest_point(point, elements[id]).distance;
    // Ids are visited in ascending order, so strict comparisons keep the smaller id on ties.
    if (d < d0) {
      d1 = d0;
      e1 = e0;
      d0 = d;
      e0 = id;
    } else if (d < d1) {
      d1 = d;
      e1 = id;
    }
  }
  if (elements.size() == 1) e1 = e0;
  return {e0, e1};
}

Annf Annf::build(const FloorPlan& plan, double root_length, int max_depth) {
  if (!(root_length > 0.0) || !std::isfinite(root_length)) throw ValidationError("root_length must be positive");
  if (max_depth < 1 || max_depth > 24) throw ValidationError("max_depth must be in [1, 24]");

  Annf a;
  a.root_length_ = root_length;
  a.inv_root_length_ = 1.0 / root_length;
  a.max_depth_ = max_depth;
  a.element_count_ = static_cast<std::uint32_t>(plan.size());
  const Bounds& b = plan.bounds();
  a.origin_ = b.min - Vec2(root_length, root_length);
  a.nx_ = static_cast<std::uint32_t>(std::floor(b.width() / root_length)) + 3;
  a.ny_ = static_cast<std::uint32_t>(std::floor(b.height() / root_length)) + 3;

  const std::size_t roots = static_cast<std::size_t>(a.nx_) * a.ny_;
  a.children_.assign(roots, 0);
  a.pairs_.resize(roots);
  for (std::uint32_t iy = 0; iy < a.ny_; ++iy) {
    for (std::uint32_t ix = 0; ix < a.nx_; ++ix) {
      const Vec2 c = a.root_center(ix, iy);
      a.pairs_[iy * a.nx_ + ix] = nearest_pair(plan, c);
    }
  }
  for (std::uint32_t iy = 0; iy < a.ny_; ++iy) {
    for (std::uint32_t ix = 0; ix < a.nx_; ++ix) {
      a.expand(plan, iy * a.nx_ + ix, a.root_center(ix, iy), root_length / 2.0, 1);
    }
  }
  return a;
}

void Annf::expand(const FloorPlan& plan, std::uint32_t node, const Vec2& center, double half, int depth) {
  if (depth >= max_depth_) return;
  const double h = half / 2.0;
  const ElementPair parent = pairs_[node];
  std::array<ElementPair, 4> child_pairs;
  bool all_same = true;
  for (std::uint32_t k = 0; k < 4; ++k) {
    child_pairs[k] = nearest_pair(plan, center + Vec2((k & 1) ? h : -h, (k & 2) ? h : -h));
    all_same = all_same && child_pairs[k] == parent;
  }
  // Every child agrees with the parent: the division is withdrawn.
  if (all_same) return;

  if (children_.size() + 4 > std::numeric_limits<std::uint32_t>::max()) throw Error("ANNF too large");
  const auto base = static_cast<std::uint32_t>(children_.size());
  children_[node] = base;
  for (std::uint32_t k = 0; k < 4; ++k) {
    children_.push_back(0);
    pairs_.push_back(child_pairs[k]);
  }
  for (std::uint32_t k = 0; k < 4; ++k) {
      expand(plan, base + k, center + Vec2((k & 1) ? h : -h, (k & 2) ? h : -h), h, depth + 1);
  }
}

bool Annf::contains(const Vec2& q) const {
  const double fx = (q.x() - origin_.x()) * inv_root_length_;
  const double fy = (q.y() - origin_.y()) * inv_root_length_;
  return fx >= 0.0 && fy >= 0.0 && fx < nx_ && fy < ny_;
}

std::optional<FieldInfo> Annf::leaf(const Vec2& q) const {
  const double fx = (q.x() - origin_.x()) * inv_root_length_;
  const double fy = (q.y() - origin_.y()) * inv_root_length_;
  if (!(fx >= 0.0 && fy >= 0.0 && fx < nx_ && fy < ny_)) return std::nullopt;
  const auto ix = static_cast<std::uint32_t>(fx);
  const auto iy = static_cast<std::uint32_t>(fy);
  std::uint32_t node = iy * nx_ + ix;
  // Same arithmetic as find() so both agree on boundary points.
  double lx = fx - ix, ly = fy - iy;
  double cx = 0.5, cy = 0.5, half = 0.5;
  int depth = 1;
  while (std::uint32_t child = children_[node]) {
    half *= 0.5;
    const bool right = lx >= cx;
    const bool up = ly >= cy;
    cx += right ? half : -half;
    cy += up ? half : -half;
    node = child + (right ? 1u : 0u) + (up ? 2u : 0u);
    ++depth;
  }
  return FieldInfo{origin_ + root_length_ * Vec2(ix + cx, iy + cy), half * root_length_, depth, pairs_[node]};
}

std::optional<ElementPair> Annf::find(const Vec2& q) const noexcept {
  const double fx = (q.x() - origin_.x()) * inv_root_length_;
  const double fy = (q.y() - origin_.y()) * inv_root_length_;
  if (!(fx >= 0.0 && fy >= 0.0 && fx < nx_ && fy < ny_)) return std::nullopt;
  const auto ix = static_cast<std::uint32_t>(fx);
  const auto iy = static_cast<std::uint32_t>(fy);
  std::uint32_t node = iy * nx_ + ix;
  // Descend in root-local units, where the root spans [0, 1)^2.
  const double lx = fx - ix, ly = fy - iy;
  double cx = 0.5, cy = 0.5, half = 0.5;
  while (std::uint32_t child = children_[node]) {
    half *= 0.5;
    const std::uint32_t right = lx >= cx;
    const std::uint32_t up = ly >= cy;
    cx += right ? half : -half;
    cy += up ? half : -half;
    node = child + right + 2 * up;
  }
  return pairs_[node];
}

ElementPair Annf::lookup(const Vec2& q) const {
  if (auto p = find(q)) return *p;
  std::ostringstream msg;
  msg << "query (" << q.x() << ", " << q.y() << ") outside ANNF grid";
  throw OutOfBounds(msg.str());
}

double Annf::leaf_length(int depth) const { return root_length_ / std::ldexp(1.0, depth - 1); }

Bounds Annf::grid_extent() const {
  return {origin_, origin_ + root_length_ * Vec2(nx_, ny_)};
}

std::size_t Annf::leaf_count() const {
  std::size_t n = 0;
  for (auto c : children_) n += (c == 0);
  return n;
}

std::string Annf::save() const {
  Writer w;
  w.out.append(kMagic, 4);
  w.put<std::uint32_t>(kFormatVersion);
  w.put<double>(origin_.x());
  w.put<double>(origin_.y());
  w.put<double>(root_length_);
  w.put<std::uint32_t>(nx_);
  w.put<std::uint32_t>(ny_);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(max_depth_));
  w.put<std::uint32_t>(element_count_);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(children_.size()));

  std::vector<std::uint32_t> stack;
  for (std::uint32_t r = nx_ * ny_; r-- > 0;) stack.push_back(r);
  while (!stack.empty()) {
    const std::uint32_t n = stack.back();
    stack.pop_back();
    w.put<std::uint8_t>(children_[n] == 0 ? 1 : 0);
    w.put<std::uint32_t>(pairs_[n].first);
    w.put<std::uint32_t>(pairs_[n].second);
    if (children_[n] != 0) {
      for (std::uint32_t k = 4; k-- > 0;) stack.push_back(children_[n] + k);
    }
  }
  w.put<std::uint32_t>(crc32_of(w.out));
  return std::move(w.out);
}

Annf Annf::load(std::string_view bytes) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("not an ANNF file (bad magic)");
  if (bytes.size() < 4 + 4 + 24 + 20 + 4) throw FormatError("ANNF data truncated");
  Reader r(bytes.substr(0, bytes.size() - 4));
  Reader crc_reader(bytes.substr(bytes.size() - 4));
  const auto stored_crc = crc_reader.get<std::uint32_t>();

  r.get<std::uint32_t>();  // magic
  const auto version = r.get<std::uint32_t>();
  if (version != kFormatVersion) throw FormatError("unsupported ANNF version " + std::to_string(version));
  if (stored_crc != crc32_of(bytes.substr(0, bytes.size() - 4))) throw FormatError("ANNF checksum mismatch");

  Annf a;
  const double ox = r.get<double>();
  const double oy = r.get<double>();
  a.origin_ = {ox, oy};
  a.root_length_ = r.get<double>();
  a.inv_root_length_ = 1.0 / a.root_length_;
  a.nx_ = r.get<std::uint32_t>();
  a.ny_ = r.get<std::uint32_t>();
  a.max_depth_ = static_cast<int>(r.get<std::uint32_t>());
  a.element_count_ = r.get<std::uint32_t>();
  const auto node_count = r.get<std::uint32_t>();
  if (!(a.root_length_ > 0.0) || !std::isfinite(ox) || !std::isfinite(oy) || a.nx_ == 0 || a.ny_ == 0 ||
      a.max_depth_ < 1 || a.max_depth_ > 24 || a.element_count_ == 0) {
    throw FormatError("invalid ANNF header");
  }
  const std::uint64_t roots = static_cast<std::uint64_t>(a.nx_) * a.ny_;
  constexpr std::size_t kNodeBytes = 9;
  if (node_count < roots || (node_count - roots) % 4 != 0 ||
      static_cast<std::uint64_t>(node_count) * kNodeBytes > bytes.size()) {
    throw FormatError("invalid ANNF node count");
  }
  a.children_.assign(roots, 0);
  a.pairs_.resize(roots);
  a.children_.reserve(node_count);
  a.pairs_.reserve(node_count);

  struct Pending {
    std::uint32_t node;
    int depth;
  };
  std::vector<Pending> stack;
  for (auto n = static_cast<std::uint32_t>(roots); n-- > 0;) stack.push_back({n, 1});
  while (!stack.empty()) {
    const Pending p = stack.back();
    stack.pop_back();
    const auto flag = r.get<std::uint8_t>();
    const ElementPair pair{r.get<std::uint32_t>(), r.get<std::uint32_t>()};
    if (flag > 1 || pair.first >= a.element_count_ || pair.second >= a.element_count_) {
      throw FormatError("invalid ANNF node record");
    }
    a.pairs_[p.node] = pair;
    if (flag == 0) {
      if (p.depth >= a.max_depth_ || a.children_.size() + 4 > node_count) throw FormatError("invalid ANNF tree");
      const auto base = static_cast<std::uint32_t>(a.children_.size());
      a.children_[p.node] = base;
      for (int k = 0; k < 4; ++k) {
        a.children_.push_back(0);
        a.pairs_.emplace_back();
      }
      for (std::uint32_t k = 4; k-- > 0;) stack.push_back({base + k, p.depth + 1});
    }
  }
  if (a.children_.size() != node_count || r.pos() != bytes.size() - 4) throw FormatError("ANNF node stream length mismatch");
  return a;
}

OracleSamples make_oracle_samples(const FloorPlan& plan, std::size_t n_samples, std::uint64_t seed) {
  if (n_samples == 0) throw ValidationError("n_samples must be >= 1");
  std::mt19937_64 rng(seed);
  const Bounds& b = plan.bounds();
  std::uniform_real_distribution<double> ux(b.min.x(), b.max.x());
  std::uniform_real_distribution<double> uy(b.min.y(), b.max.y());
  OracleSamples s;
  s.points.reserve(n_samples);
  s.nearest.reserve(n_samples);
  for (std::size_t i = 0; i < n_samples; ++i) {
    const Vec2 p(ux(rng), uy(rng));
    s.points.push_back(p);
    s.nearest.push_back(nearest_pair(plan, p).first);
  }
  return s;
}

double time_lookups_ns(const Annf& annf, const std::vector<Vec2>& queries, double min_seconds) {
  if (queries.empty()) return 0.0;
  using clock = std::chrono::steady_clock;
  std::uint64_t sink = 0;
  std::size_t total = 0;
  const auto t0 = clock::now();
  double elapsed = 0.0;
  do {
    for (const auto& q : queries) {
      if (auto p = annf.find(q)) sink += p->first;
    }
    total += queries.size();
    elapsed = std::chrono::duration<double>(clock::now() - t0).count();
  } while (elapsed < min_seconds);
  volatile std::uint64_t keep = sink;
  (void)keep;
  return elapsed * 1e9 / static_cast<double>(total);
}

ValidationReport validate_annf(const Annf& annf, const OracleSamples& samples) {
  ValidationReport r;
  r.depth = annf.max_depth();
  r.leaf_length_cm = annf.leaf_length(annf.max_depth()) * 100.0;
  r.sample_count = samples.points.size();
  std::size_t hit1 = 0, hit12 = 0;
  for (std::size_t i = 0; i < samples.points.size(); ++i) {
    const auto pair = annf.find(samples.points[i]);
    if (!pair) continue;
    hit1 += pair->first == samples.nearest[i];
    hit12 += pair->contains(samples.nearest[i]);
  }
  if (r.sample_count > 0) {
    r.hit_first = static_cast<double>(hit1) / r.sample_count;
    r.hit_first_or_second = static_cast<double>(hit12) / r.sample_count;
  }
  r.mean_lookup_ns = time_lookups_ns(annf, samples.points);
  return r;
}

ValidationReport validate_annf(const Annf& annf, const FloorPlan& plan, std::size_t n_samples, std::uint64_t seed) {
  return validate_annf(annf, make_oracle_samples(plan, n_samples, seed));
}

std::string validation_csv_header() { return "depth,leaf_cm,hit1,hit12,ns_per_lookup,samples"; }

std::string validation_csv_row(const ValidationReport& r) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d,%.2f,%.6f,%.6f,%.3f,%zu", r.depth, r.leaf_length_cm, r.hit_first,
                r.hit_first_or_second, r.mean_lookup_ns, r.sample_count);
  return buf;
}

}  // namespace fploc
