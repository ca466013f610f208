// Copyright 2026 The duotrack Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "duotrack/numkernel/params.hpp"

#include <bit>
#include <cmath>
#include <fstream>
#include <iterator>

#include "duotrack/core/errors.hpp"

namespace duotrack::nk {

void ParamStore::add(std::string name, Tensor value) {
  if (index_.count(name)) throw ContractError("duplicate parameter name: " + name);
  index_.emplace(name, entries_.size());
  entries_.push_back({std::move(name), std::move(value)});
}

bool ParamStore::has(std::string_view name) const { return index_.find(name) != index_.end(); }

std::size_t ParamStore::index_of(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw ContractError("unknown parameter: " + std::string(name));
  return it->second;
}

Tensor& ParamStore::get(std::string_view name) { return entries_[index_of(name)].value; }
const Tensor& ParamStore::get(std::string_view name) const {
  return entries_[index_of(name)].value;
}

std::size_t ParamStore::scalar_count() const {
  std::size_t n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

void ParamStore::assign(const std::vector<NamedTensor>& other) {
  for (const auto& e : other) {
    Tensor& dst = get(e.name);
    if (dst.shape() != e.value.shape()) {
      throw ShapeError("parameter " + e.name + " has shape " + e.value.shape_string() +
                       ", expected " + dst.shape_string());
    }
    dst = e.value;
  }
}

void ParamStore::zero() {
  for (auto& e : entries_)
    for (auto& v : e.value.data()) v = 0.0;
}

Bound::Bound(Tape& tape, const ParamStore& store, bool trainable) : store_(&store) {
  vars_.reserve(store.size());
  for (const auto& e : store.entries()) {
    vars_.push_back(trainable ? tape.leaf(e.value) : tape.constant(e.value));
  }
}

Var Bound::operator[](std::string_view name) const { return vars_[store_->index_of(name)]; }

std::vector<Tensor> Bound::gradients(const Gradients& g) const {
  std::vector<Tensor> out;
  out.reserve(vars_.size());
  for (const Var& v : vars_) out.push_back(g.of(v));
  return out;
}

Tensor xavier_uniform(std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t = Tensor::zeros({fan_in, fan_out});
  for (auto& v : t.data()) v = rng.uniform(-bound, bound);
  return t;
}

Tensor normal_init(std::vector<std::size_t> shape, double stddev, Rng& rng) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (auto& v : t.data()) v = stddev * rng.normal();
  return t;
}

const Tensor& Checkpoint::get(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return t.value;
  }
  throw DataError("checkpoint has no tensor named " + std::string(name));
}

bool Checkpoint::has(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return true;
  }
  return false;
}

void Checkpoint::put(std::string name, Tensor value) {
  tensors.push_back({std::move(name), std::move(value)});
}

namespace {

const unsigned char kMagic[4] = {'D', 'T', 'C', 'K'};

void put_u32(std::vector<unsigned char>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}
void put_u64(std::vector<unsigned char>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<unsigned char>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(std::span<const unsigned char> b) : b_(b) {}
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b_[pos_ + i]) << (8 * i);
    pos_ += 8;
    return v;
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw DataError("checkpoint truncated");
  }
  std::span<const unsigned char> b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<unsigned char> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<unsigned char> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, kCheckpointVersion);
  put_u32(out, static_cast<std::uint32_t>(ckpt.meta.size()));
  out.insert(out.end(), ckpt.meta.begin(), ckpt.meta.end());
  put_u32(out, static_cast<std::uint32_t>(ckpt.tensors.size()));
  for (const auto& t : ckpt.tensors) {
    put_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out.insert(out.end(), t.name.begin(), t.name.end());
    put_u32(out, static_cast<std::uint32_t>(t.value.rank()));
    for (auto d : t.value.shape()) put_u64(out, d);
    for (double v : t.value.data()) put_u64(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(std::span<const unsigned char> bytes) {
  Reader r(bytes);
  if (r.str(4) != std::string(reinterpret_cast<const char*>(kMagic), 4)) {
    throw DataError("not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.meta = r.str(r.u32());
  const std::uint32_t count = r.u32();
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = r.str(r.u32());
    const std::uint32_t rank = r.u32();
    std::vector<std::size_t> shape(rank);
    std::size_t n = 1;
    for (auto& d : shape) {
      d = static_cast<std::size_t>(r.u64());
      n *= d;
    }
    std::vector<double> data(n);
    for (auto& v : data) v = std::bit_cast<double>(r.u64());
    ckpt.tensors.push_back({std::move(name), Tensor(std::move(shape), std::move(data))});
  }
  if (!r.done()) throw DataError("trailing bytes after checkpoint");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw UsageError("cannot write checkpoint " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read checkpoint " + path);
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                   std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

Tensor pack_words(std::span<const std::uint64_t> words) {
  std::vector<double> out;
  for (auto w : words) {
    out.push_back(static_cast<double>(w & 0xffffffffULL));
    out.push_back(static_cast<double>(w >> 32));
  }
  return Tensor::vector(std::move(out));
}

std::vector<std::uint64_t> unpack_words(const Tensor& t) {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i + 1 < t.size(); i += 2) {
    out.push_back(static_cast<std::uint64_t>(t[i]) | (static_cast<std::uint64_t>(t[i + 1]) << 32));
  }
  return out;
}

}  // namespace duotrack::nk
