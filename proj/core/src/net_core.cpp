#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rcnet/net.hpp"
#include "rcnet/rcnet.hpp"
#include "rcnet/serialize.hpp"

namespace rcnet {

namespace {

void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

bool all_finite(const Mat& m) { return m.allFinite(); }
bool all_finite(const Vec& v) { return v.allFinite(); }

}  // namespace

// ---------------------------------------------------------------------------
// AffineMap
// ---------------------------------------------------------------------------

AffineMap::AffineMap(Mat W_, Vec b_) : W(std::move(W_)), b(std::move(b_)) {
  validate();
}

void AffineMap::validate() const {
  require(W.rows() >= 1 && W.cols() >= 1, "AffineMap: W must be non-empty");
  require(b.size() == W.rows(),
          "AffineMap: b has " + std::to_string(b.size()) + " entries but W has " +
              std::to_string(W.rows()) + " rows");
  require(all_finite(W) && all_finite(b), "AffineMap: entries must be finite");
}

AffineMap AffineMap::identity(int d) {
  require(d >= 1, "AffineMap::identity: dimension must be >= 1");
  return AffineMap(Mat::Identity(d, d), Vec::Zero(d));
}

AffineMap AffineMap::zero(int out_dim, int in_dim) {
  require(out_dim >= 1 && in_dim >= 1, "AffineMap::zero: dimensions must be >= 1");
  return AffineMap(Mat::Zero(out_dim, in_dim), Vec::Zero(out_dim));
}

Vec eval_affine(const AffineMap& a, const Vec& x) {
  require(x.size() == a.in_dim(),
          "eval_affine: input has " + std::to_string(x.size()) +
              " entries, expected " + std::to_string(a.in_dim()));
  return a.W * x + a.b;
}

Mat eval_affine_batch(const AffineMap& a, const Mat& X) {
  require(X.rows() == a.in_dim(),
          "eval_affine_batch: input has " + std::to_string(X.rows()) +
              " rows, expected " + std::to_string(a.in_dim()));
  return (a.W * X).colwise() + a.b;
}

AffineMap compose(const AffineMap& outer, const AffineMap& inner) {
  require(outer.in_dim() == inner.out_dim(),
          "compose: outer expects " + std::to_string(outer.in_dim()) +
              " inputs, inner produces " + std::to_string(inner.out_dim()));
  return AffineMap(outer.W * inner.W, outer.W * inner.b + outer.b);
}

AffineMap coord_select(const std::vector<int>& idx, int in_dim) {
  require(!idx.empty(), "coord_select: index list must be non-empty");
  Mat W = Mat::Zero(static_cast<int>(idx.size()), in_dim);
  for (int i = 0; i < static_cast<int>(idx.size()); ++i) {
    require(idx[i] >= 0 && idx[i] < in_dim,
            "coord_select: index " + std::to_string(idx[i]) + " out of range");
    W(i, idx[i]) = 1.0;
  }
  return AffineMap(W, Vec::Zero(static_cast<int>(idx.size())));
}

AffineMap coord_embed(const std::vector<int>& idx, int out_dim) {
  require(!idx.empty(), "coord_embed: index list must be non-empty");
  Mat W = Mat::Zero(out_dim, static_cast<int>(idx.size()));
  std::vector<bool> used(static_cast<size_t>(out_dim), false);
  for (int i = 0; i < static_cast<int>(idx.size()); ++i) {
    require(idx[i] >= 0 && idx[i] < out_dim,
            "coord_embed: index " + std::to_string(idx[i]) + " out of range");
    require(!used[static_cast<size_t>(idx[i])],
            "coord_embed: duplicate target row " + std::to_string(idx[i]));
    used[static_cast<size_t>(idx[i])] = true;
    W(idx[i], i) = 1.0;
  }
  return AffineMap(W, Vec::Zero(out_dim));
}

AffineMap direct_sum(const AffineMap& a, const AffineMap& b) {
  const int ro = a.out_dim() + b.out_dim();
  const int ci = a.in_dim() + b.in_dim();
  Mat W = Mat::Zero(ro, ci);
  W.topLeftCorner(a.out_dim(), a.in_dim()) = a.W;
  W.bottomRightCorner(b.out_dim(), b.in_dim()) = b.W;
  Vec bb(ro);
  bb << a.b, b.b;
  return AffineMap(std::move(W), std::move(bb));
}

AffineMap vstack(const AffineMap& a, const AffineMap& b) {
  require(a.in_dim() == b.in_dim(), "vstack: input dimensions differ");
  Mat W(a.out_dim() + b.out_dim(), a.in_dim());
  W << a.W, b.W;
  Vec bb(a.out_dim() + b.out_dim());
  bb << a.b, b.b;
  return AffineMap(std::move(W), std::move(bb));
}

AffineMap diag_map(const Vec& s) {
  require(s.size() >= 1, "diag_map: scale vector must be non-empty");
  Mat W = Mat::Zero(s.size(), s.size());
  W.diagonal() = s;
  return AffineMap(std::move(W), Vec::Zero(s.size()));
}

// ---------------------------------------------------------------------------
// FeedForwardNet
// ---------------------------------------------------------------------------

int FeedForwardNet::width() const {
  int w = 0;
  for (size_t i = 0; i + 1 < layers.size(); ++i) {
    w = std::max(w, layers[i].out_dim());
  }
  return w;
}

void FeedForwardNet::validate() const {
  require(!layers.empty(), "FeedForwardNet: must have at least one affine layer");
  for (const auto& l : layers) l.validate();
  for (size_t i = 0; i + 1 < layers.size(); ++i) {
    require(layers[i].out_dim() == layers[i + 1].in_dim(),
            "FeedForwardNet: layer " + std::to_string(i) + " outputs " +
                std::to_string(layers[i].out_dim()) + " values but layer " +
                std::to_string(i + 1) + " expects " +
                std::to_string(layers[i + 1].in_dim()));
  }
}

Vec eval_net(const FeedForwardNet& net, const Vec& x) {
  require(!net.layers.empty(), "eval_net: empty network");
  Vec z = eval_affine(net.layers[0], x);
  for (size_t i = 1; i < net.layers.size(); ++i) {
    z = z.cwiseMax(0.0);
    z = eval_affine(net.layers[i], z);
  }
  return z;
}

Mat eval_net_batch(const FeedForwardNet& net, const Mat& X) {
  require(!net.layers.empty(), "eval_net_batch: empty network");
  Mat Z = eval_affine_batch(net.layers[0], X);
  for (size_t i = 1; i < net.layers.size(); ++i) {
    Z = Z.cwiseMax(0.0);
    Z = eval_affine_batch(net.layers[i], Z);
  }
  return Z;
}

FeedForwardNet affine_net(const AffineMap& a) {
  FeedForwardNet net;
  net.layers.push_back(a);
  return net;
}

FeedForwardNet compose_nets(const FeedForwardNet& after, const FeedForwardNet& before) {
  before.validate();
  after.validate();
  require(after.in_dim() == before.out_dim(),
          "compose_nets: dimension mismatch at junction");
  FeedForwardNet out;
  out.layers.assign(before.layers.begin(), before.layers.end() - 1);
  out.layers.push_back(compose(after.layers.front(), before.layers.back()));
  out.layers.insert(out.layers.end(), after.layers.begin() + 1, after.layers.end());
  return out;
}

FeedForwardNet with_pre(const FeedForwardNet& net, const AffineMap& a) {
  return compose_nets(net, affine_net(a));
}

FeedForwardNet with_post(const AffineMap& a, const FeedForwardNet& net) {
  return compose_nets(affine_net(a), net);
}

FeedForwardNet pad_depth(const FeedForwardNet& net, int target_depth, double M) {
  net.validate();
  require(target_depth >= net.depth(),
          "pad_depth: target depth " + std::to_string(target_depth) +
              " is below current depth " + std::to_string(net.depth()));
  require(M >= 0.0, "pad_depth: shift M must be >= 0");
  const int extra = target_depth - net.depth();
  if (extra == 0) return net;
  FeedForwardNet out = net;
  out.layers.back().b.array() += M;
  const int d = net.out_dim();
  for (int i = 0; i < extra - 1; ++i) {
    out.layers.push_back(AffineMap::identity(d));
  }
  AffineMap last = AffineMap::identity(d);
  last.b.array() -= M;
  out.layers.push_back(last);
  return out;
}

FeedForwardNet pad_width_to(const FeedForwardNet& net, int target_width) {
  net.validate();
  require(net.depth() >= 1, "pad_width_to: net must have at least one hidden layer");
  require(target_width >= net.width(),
          "pad_width_to: target width " + std::to_string(target_width) +
              " is below current width " + std::to_string(net.width()));
  FeedForwardNet out = net;
  for (size_t i = 0; i + 1 < out.layers.size(); ++i) {
    const int cur = out.layers[i].out_dim();
    const int add = target_width - cur;
    if (add == 0) continue;
    out.layers[i].W.conservativeResize(target_width, Eigen::NoChange);
    out.layers[i].W.bottomRows(add).setZero();
    out.layers[i].b.conservativeResize(target_width);
    out.layers[i].b.tail(add).setZero();
    out.layers[i + 1].W.conservativeResize(Eigen::NoChange, target_width);
    out.layers[i + 1].W.rightCols(add).setZero();
  }
  return out;
}

FeedForwardNet stack_shared_input(const std::vector<FeedForwardNet>& nets) {
  require(!nets.empty(), "stack_shared_input: need at least one net");
  const int d_in = nets[0].in_dim();
  const int L = nets[0].depth();
  for (const auto& n : nets) {
    n.validate();
    require(n.in_dim() == d_in, "stack_shared_input: all nets must share in_dim");
    require(n.depth() == L, "stack_shared_input: all nets must share depth");
  }
  FeedForwardNet out;
  AffineMap first = nets[0].layers[0];
  for (size_t k = 1; k < nets.size(); ++k) first = vstack(first, nets[k].layers[0]);
  out.layers.push_back(std::move(first));
  for (int l = 1; l <= L; ++l) {
    AffineMap a = nets[0].layers[static_cast<size_t>(l)];
    for (size_t k = 1; k < nets.size(); ++k) {
      a = direct_sum(a, nets[k].layers[static_cast<size_t>(l)]);
    }
    out.layers.push_back(std::move(a));
  }
  return out;
}

FeedForwardNet stack_parallel(const std::vector<FeedForwardNet>& nets) {
  require(!nets.empty(), "stack_parallel: need at least one net");
  const int L = nets[0].depth();
  for (const auto& n : nets) {
    n.validate();
    require(n.depth() == L, "stack_parallel: all nets must share depth");
  }
  FeedForwardNet out;
  for (int l = 0; l <= L; ++l) {
    AffineMap a = nets[0].layers[static_cast<size_t>(l)];
    for (size_t k = 1; k < nets.size(); ++k) {
      a = direct_sum(a, nets[k].layers[static_cast<size_t>(l)]);
    }
    out.layers.push_back(std::move(a));
  }
  return out;
}

// ---------------------------------------------------------------------------
// RCNet
// ---------------------------------------------------------------------------

void RCNet::validate() const {
  pre.validate();
  block.validate();
  post.validate();
  require(reps >= 0, "RCNet: reps must be >= 0");
  require(block.in_dim() == block.out_dim(),
          "RCNet: block must map R^d to R^d (got " + std::to_string(block.in_dim()) +
              " -> " + std::to_string(block.out_dim()) + ")");
  require(pre.out_dim() == block.in_dim(), "RCNet: pre output must match block dimension");
  require(post.in_dim() == block.in_dim(), "RCNet: post input must match block dimension");
}

Vec eval_rcnet(const RCNet& net, const Vec& x) {
  Vec z = eval_affine(net.pre, x);
  for (int s = 0; s < net.reps; ++s) z = eval_net(net.block, z);
  return eval_affine(net.post, z);
}

Mat eval_rcnet_batch(const RCNet& net, const Mat& X) {
  Mat Z = eval_affine_batch(net.pre, X);
  for (int s = 0; s < net.reps; ++s) Z = eval_net_batch(net.block, Z);
  return eval_affine_batch(net.post, Z);
}

double eval_rcnet_scalar(const RCNet& net, const Vec& x) {
  require(net.d_out() == 1, "eval_rcnet_scalar: net output dimension must be 1");
  return eval_rcnet(net, x)(0);
}

std::pair<Vec, Vec> euler_flow_check(const FeedForwardNet& block, const Vec& z0,
                                     int steps, double delta) {
  block.validate();
  require(block.in_dim() == block.out_dim(), "euler_flow_check: block must be square");
  require(z0.size() == block.in_dim(), "euler_flow_check: initial state has wrong dimension");
  require(steps >= 0, "euler_flow_check: steps must be >= 0");
  require(delta > 0.0, "euler_flow_check: delta must be positive");
  Vec direct = z0;
  Vec euler = z0;
  for (int s = 0; s < steps; ++s) {
    direct = eval_net(block, direct);
    const Vec g = eval_net(block, euler);
    const Vec field = (g - euler) / delta;
    euler = euler + delta * field;
  }
  return {direct, euler};
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

void append_number(std::string& out, double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

void append_affine(std::string& out, const AffineMap& a) {
  out += "{\"w\":[";
  for (int r = 0; r < a.out_dim(); ++r) {
    for (int c = 0; c < a.in_dim(); ++c) {
      if (r != 0 || c != 0) out += ',';
      append_number(out, a.W(r, c));
    }
  }
  out += "],\"b\":[";
  for (int r = 0; r < a.out_dim(); ++r) {
    if (r != 0) out += ',';
    append_number(out, a.b(r));
  }
  out += "]}";
}

AffineMap parse_affine(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object() || !j.contains("w") || !j.contains("b")) {
    throw ValidationError("deserialize: " + where + " must be an object with \"w\" and \"b\"");
  }
  const auto& jw = j.at("w");
  const auto& jb = j.at("b");
  if (!jw.is_array() || !jb.is_array() || jb.empty()) {
    throw ValidationError("deserialize: " + where + " has malformed \"w\" or \"b\"");
  }
  const auto rows = static_cast<Eigen::Index>(jb.size());
  if (jw.size() % jb.size() != 0) {
    throw ValidationError("deserialize: " + where + " weight count is not a multiple of row count");
  }
  const auto cols = static_cast<Eigen::Index>(jw.size() / jb.size());
  if (cols == 0) {
    throw ValidationError("deserialize: " + where + " has zero columns");
  }
  Mat W(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) {
      const auto& v = jw.at(static_cast<size_t>(r * cols + c));
      if (!v.is_number()) throw ValidationError("deserialize: " + where + " has non-numeric weight");
      W(r, c) = v.get<double>();
    }
  }
  Vec b(rows);
  for (Eigen::Index r = 0; r < rows; ++r) {
    const auto& v = jb.at(static_cast<size_t>(r));
    if (!v.is_number()) throw ValidationError("deserialize: " + where + " has non-numeric bias");
    b(r) = v.get<double>();
  }
  return AffineMap(std::move(W), std::move(b));
}

}  // namespace

std::string serialize(const RCNet& net, const NetMeta* meta) {
  net.validate();
  std::string out;
  out.reserve(4096);
  out += "{\"d_in\":" + std::to_string(net.d_in());
  out += ",\"d_block\":" + std::to_string(net.d_block());
  out += ",\"d_out\":" + std::to_string(net.d_out());
  out += ",\"reps\":" + std::to_string(net.reps);
  out += ",\n\"pre\":";
  append_affine(out, net.pre);
  out += ",\n\"block\":{\"layers\":[\n";
  for (size_t i = 0; i < net.block.layers.size(); ++i) {
    if (i != 0) out += ",\n";
    append_affine(out, net.block.layers[i]);
  }
  out += "\n]},\n\"post\":";
  append_affine(out, net.post);
  if (meta != nullptr && !meta->empty()) {
    out += ",\n\"meta\":{\"numbers\":{";
    bool first = true;
    for (const auto& [k, v] : meta->numbers) {
      if (!first) out += ',';
      first = false;
      out += '"' + k + "\":";
      append_number(out, v);
    }
    out += "},\"strings\":{";
    first = true;
    for (const auto& [k, v] : meta->strings) {
      if (!first) out += ',';
      first = false;
      out += '"' + k + "\":\"" + v + '"';
    }
    out += "}}";
  }
  out += "}\n";
  return out;
}

RCNet deserialize(const std::string& json_text, NetMeta* meta_out) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("deserialize: invalid JSON: ") + e.what());
  }
  for (const char* key : {"d_in", "d_block", "d_out", "reps", "pre", "block", "post"}) {
    if (!j.contains(key)) {
      throw ValidationError(std::string("deserialize: missing key \"") + key + "\"");
    }
  }
  RCNet net;
  net.pre = parse_affine(j.at("pre"), "pre");
  net.post = parse_affine(j.at("post"), "post");
  if (!j.at("reps").is_number_integer()) {
    throw ValidationError("deserialize: \"reps\" must be an integer");
  }
  net.reps = j.at("reps").get<int>();
  const auto& jb = j.at("block");
  if (!jb.is_object() || !jb.contains("layers") || !jb.at("layers").is_array() ||
      jb.at("layers").empty()) {
    throw ValidationError("deserialize: \"block\" must contain a non-empty \"layers\" array");
  }
  for (size_t i = 0; i < jb.at("layers").size(); ++i) {
    net.block.layers.push_back(
        parse_affine(jb.at("layers").at(i), "block layer " + std::to_string(i)));
  }
  const auto as_int = [&](const char* key) {
    if (!j.at(key).is_number_integer()) {
      throw ValidationError(std::string("deserialize: \"") + key + "\" must be an integer");
    }
    return j.at(key).get<int>();
  };
  if (as_int("d_in") != net.d_in() || as_int("d_block") != net.d_block() ||
      as_int("d_out") != net.d_out()) {
    throw ValidationError("deserialize: declared dimensions do not match stored matrices");
  }
  net.validate();
  if (meta_out != nullptr) {
    *meta_out = NetMeta{};
    if (j.contains("meta") && j.at("meta").is_object()) {
      const auto& jm = j.at("meta");
      if (jm.contains("numbers")) {
        for (const auto& [k, v] : jm.at("numbers").items()) {
          meta_out->numbers[k] = v.get<double>();
        }
      }
      if (jm.contains("strings")) {
        for (const auto& [k, v] : jm.at("strings").items()) {
          meta_out->strings[k] = v.get<std::string>();
        }
      }
    }
  }
  return net;
}

void save_rcnet(const RCNet& net, const std::string& path, const NetMeta* meta) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ValidationError("save_rcnet: cannot open \"" + path + "\" for writing");
  const std::string text = serialize(net, meta);
  f.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!f) throw ValidationError("save_rcnet: write to \"" + path + "\" failed");
}

RCNet load_rcnet(const std::string& path, NetMeta* meta_out) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("load_rcnet: cannot open \"" + path + "\"");
  std::ostringstream ss;
  ss << f.rdbuf();
  return deserialize(ss.str(), meta_out);
}

}  // namespace rcnet
