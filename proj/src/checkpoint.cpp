#include "dkse/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "dkse/util.hpp"

namespace dkse {
namespace {

constexpr char kMagic[] = "DKSE-CKPT v1\n";
constexpr size_t kMagicLen = sizeof(kMagic) - 1;

void put_u64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(char((v >> (8 * i)) & 0xff));
}
void put_i64(std::string& out, int64_t v) {
  put_u64(out, static_cast<uint64_t>(v));
}
void put_f64(std::string& out, double v) {
  put_u64(out, std::bit_cast<uint64_t>(v));
}
void put_u8(std::string& out, uint8_t v) { out.push_back(char(v)); }

class Reader {
 public:
  explicit Reader(const std::string& bytes) : bytes_(bytes) {}

  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i)
      v |= uint64_t(uint8_t(bytes_[pos_ + i])) << (8 * i);
    pos_ += 8;
    return v;
  }
  int64_t i64() { return static_cast<int64_t>(u64()); }
  double f64() { return std::bit_cast<double>(u64()); }
  uint8_t u8() {
    need(1);
    return uint8_t(bytes_[pos_++]);
  }
  bool flag() {
    uint8_t v = u8();
    check(v <= 1, "corrupt checkpoint: flag byte out of range");
    return v != 0;
  }
  void expect_magic() {
    need(kMagicLen);
    check(bytes_.compare(0, kMagicLen, kMagic) == 0,
          "not a DKSE-CKPT v1 checkpoint");
    pos_ = kMagicLen;
  }
  void expect_end() const {
    check(pos_ == bytes_.size(), "corrupt checkpoint: trailing bytes");
  }

 private:
  void need(size_t n) const {
    check(pos_ + n <= bytes_.size(), "corrupt checkpoint: truncated");
  }
  const std::string& bytes_;
  size_t pos_ = 0;
};

int clamped_int(int64_t v, const char* what) {
  check(v >= 0 && v <= 1'000'000'000, std::string("corrupt checkpoint: ") + what);
  return static_cast<int>(v);
}

}  // namespace

std::string encode_checkpoint(const Checkpoint& ckpt) {
  const HyperParams& h = ckpt.hyper;
  const TensorShapes& s = ckpt.params.shape;

  std::string out;
  out.append(kMagic, kMagicLen);
  put_u64(out, static_cast<uint64_t>(s.nodes));
  put_u64(out, static_cast<uint64_t>(s.relations));
  put_u64(out, static_cast<uint64_t>(s.queries));
  put_u64(out, static_cast<uint64_t>(s.dim));

  put_i64(out, h.l_u);
  put_i64(out, h.n_u);
  put_i64(out, h.l_v);
  put_i64(out, h.n_v);
  put_i64(out, h.d);
  put_i64(out, h.n);
  put_i64(out, h.batch_size);
  put_i64(out, h.epochs);
  put_i64(out, h.patience);
  put_i64(out, h.negative_ratio);
  put_f64(out, h.lambda);
  put_f64(out, h.tau);
  put_f64(out, h.learning_rate);
  put_u8(out, static_cast<uint8_t>(h.grouping));
  put_u8(out, h.mask.user_item);
  put_u8(out, h.mask.relation);
  put_u8(out, h.mask.head);
  put_u8(out, h.mask.tail);
  put_u8(out, h.use_contrastive);
  put_u8(out, h.contrastive_raw_logits);
  put_u8(out, h.strict_ratio_norm);
  put_u8(out, h.aggregate_terminals);
  put_u8(out, h.use_neighborhood);
  put_u64(out, h.seed);

  for (const auto& tensor : ckpt.params.tensors) {
    put_u64(out, tensor.size());
    for (double v : tensor) put_f64(out, v);
  }
  return out;
}

Checkpoint decode_checkpoint(const std::string& bytes) {
  Reader r(bytes);
  r.expect_magic();

  Checkpoint ckpt;
  TensorShapes& s = ckpt.params.shape;
  s.nodes = clamped_int(r.i64(), "node count");
  s.relations = clamped_int(r.i64(), "relation count");
  s.queries = clamped_int(r.i64(), "query count");
  s.dim = clamped_int(r.i64(), "dimension");

  HyperParams& h = ckpt.hyper;
  h.l_u = clamped_int(r.i64(), "l_u");
  h.n_u = clamped_int(r.i64(), "n_u");
  h.l_v = clamped_int(r.i64(), "l_v");
  h.n_v = clamped_int(r.i64(), "n_v");
  h.d = clamped_int(r.i64(), "d");
  h.n = clamped_int(r.i64(), "n");
  h.batch_size = clamped_int(r.i64(), "batch size");
  h.epochs = clamped_int(r.i64(), "epochs");
  h.patience = clamped_int(r.i64(), "patience");
  h.negative_ratio = clamped_int(r.i64(), "negative ratio");
  h.lambda = r.f64();
  h.tau = r.f64();
  h.learning_rate = r.f64();
  uint8_t grouping = r.u8();
  check(grouping <= 3, "corrupt checkpoint: grouping mode out of range");
  h.grouping = static_cast<GroupingMode>(grouping);
  h.mask.user_item = r.flag();
  h.mask.relation = r.flag();
  h.mask.head = r.flag();
  h.mask.tail = r.flag();
  h.use_contrastive = r.flag();
  h.contrastive_raw_logits = r.flag();
  h.strict_ratio_norm = r.flag();
  h.aggregate_terminals = r.flag();
  h.use_neighborhood = r.flag();
  h.seed = r.u64();

  const TensorShapes expect = s;
  ckpt.params.tensors = ParameterSet::zeros(expect);
  for (int t = 0; t < kTensorCount; ++t) {
    uint64_t count = r.u64();
    check(count == ckpt.params.tensors[t].size(),
          "corrupt checkpoint: tensor size does not match shape");
    for (uint64_t i = 0; i < count; ++i) ckpt.params.tensors[t][i] = r.f64();
  }
  r.expect_end();
  check(ckpt.params.all_finite(), "corrupt checkpoint: non-finite tensor entry");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file_atomic(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) {
  return decode_checkpoint(read_file(path));
}

}  // namespace dkse
