/*
 * Copyright 2026 The FallDet Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "falldet/mpc/engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "falldet/error.hpp"

namespace falldet::mpc {
namespace {

int ceil_log2(std::uint64_t v) {
  int r = 0;
  while ((std::uint64_t{1} << r) < v) ++r;
  return r;
}

u128 low_bits_of(FieldElement e, int k) {
  return k >= 128 ? e.value() : (e.value() & ((u128{1} << k) - 1));
}

void require_same_size(std::size_t a, std::size_t b, const char* op) {
  if (a != b) {
    throw MalformedInput(std::string(op) + ": operand lengths differ (" + std::to_string(a) +
                         " vs " + std::to_string(b) + ")");
  }
}

}  // namespace

std::string to_string(OpenKind kind) {
  switch (kind) {
    case OpenKind::kMasked:
      return "masked";
    case OpenKind::kOutput:
      return "output";
    case OpenKind::kDebug:
      return "debug";
  }
  return "unknown";
}

Engine::OpScope::OpScope(Engine& e, const char* name) : engine_(e) {
  engine_.op_stack_.emplace_back(name);
}

Engine::OpScope::~OpScope() { engine_.op_stack_.pop_back(); }

Engine::Engine(FixedPointCodec codec, EngineOptions options, PartyIndex self,
               Channel& channel, RandomSource& rng)
    : codec_(std::move(codec)),
      options_(options),
      self_(self),
      channel_(channel),
      rng_(rng) {
  options_.policy.validate();
  const std::size_t n = options_.policy.parties;
  if (self_ < 1 || self_ > n) {
    throw ConfigError("party index " + std::to_string(self_) + " outside 1.." +
                      std::to_string(n));
  }
  for (std::size_t i = 1; i <= n; ++i) all_parties_.push_back(static_cast<PartyIndex>(i));
  for (std::size_t i = 1; i <= 2 * options_.policy.degree + 1; ++i) {
    mul_parties_.push_back(static_cast<PartyIndex>(i));
  }
  mul_weights_ = shamir::lagrange_weights(field(), mul_parties_);
  const std::size_t d1 = options_.policy.reconstruct_count();
  std::vector<PartyIndex> base(all_parties_.begin(), all_parties_.begin() + static_cast<long>(d1));
  open_weights_ = shamir::lagrange_weights(field(), base);
  for (std::size_t j = d1 + 1; j <= n; ++j) {
    std::vector<FieldElement> w(d1);
    for (std::size_t i = 1; i <= d1; ++i) {
      FieldElement num = field().one();
      FieldElement den = field().one();
      for (std::size_t l = 1; l <= d1; ++l) {
        if (l == i) continue;
        num = field().mul(num, field().sub(field().element(j), field().element(l)));
        den = field().mul(den, field().sub(field().element(i), field().element(l)));
      }
      w[i - 1] = field().mul(num, field().inv(den));
    }
    check_weights_.push_back(std::move(w));
  }
  inv2_ = field().inv(field().element(2));
}

Secret Engine::make(FieldElement share, int scale) {
  return Secret{share, scale, next_slot_++};
}

Secret Engine::input(FieldElement share, int scale) { return make(share, scale); }

Secret Engine::constant(FieldElement value, int scale) { return make(value, scale); }

Secret Engine::add(const Secret& a, const Secret& b) {
  if (a.scale != b.scale) {
    throw ProtocolError("add: scale mismatch (" + std::to_string(a.scale) + " vs " +
                        std::to_string(b.scale) + ")");
  }
  return make(field().add(a.share, b.share), a.scale);
}

Secret Engine::sub(const Secret& a, const Secret& b) {
  if (a.scale != b.scale) {
    throw ProtocolError("sub: scale mismatch (" + std::to_string(a.scale) + " vs " +
                        std::to_string(b.scale) + ")");
  }
  return make(field().sub(a.share, b.share), a.scale);
}

Secret Engine::neg(const Secret& a) { return make(field().neg(a.share), a.scale); }

Secret Engine::add_public(const Secret& a, FieldElement c) {
  return make(field().add(a.share, c), a.scale);
}

Secret Engine::mul_public(const Secret& a, FieldElement c, int c_scale) {
  return make(field().mul(a.share, c), a.scale + c_scale);
}

Secret Engine::dot_public(std::span<const Secret> a, std::span<const FieldElement> c,
                          int c_scale) {
  require_same_size(a.size(), c.size(), "dot_public");
  if (a.empty()) throw MalformedInput("dot_public: empty operands");
  FieldElement acc = field().zero();
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j].scale != a[0].scale) throw ProtocolError("dot_public: scale mismatch");
    acc = field().add(acc, field().mul(a[j].share, c[j]));
  }
  return make(acc, a[0].scale + c_scale);
}

std::vector<std::vector<FieldElement>> Engine::exchange(
    const std::string& op, std::uint64_t slot_begin, std::uint64_t slot_count,
    const std::vector<std::vector<FieldElement>>& out) {
  const std::size_t n = options_.policy.parties;
  ++round_;
  counter_.record_round(op_stack_.empty() ? op : op_stack_.front(), n - 1);
  transcript_.rounds.insert(round_);

  for (PartyIndex j : all_parties_) {
    if (j == self_) continue;
    RoundMessage msg;
    msg.round = round_;
    msg.op = op;
    msg.slot_begin = slot_begin;
    msg.slot_count = slot_count;
    msg.words = field().to_words(out[j - 1]);
    if (options_.hash_transcript) {
      const std::uint64_t head[] = {round_, self_, j};
      hash_.update_words(head);
      hash_.update_words(msg.words);
    }
    if (options_.transcript == TranscriptLevel::kFull) {
      transcript_.messages.push_back(MessageRecord{round_, true, j, op, msg.words});
    }
    channel_.send(j, msg);
  }

  std::vector<std::vector<FieldElement>> in(n);
  for (PartyIndex j : all_parties_) {
    if (j == self_) continue;
    RoundMessage msg = channel_.receive(j, round_);
    if (msg.round != round_ || msg.op != op || msg.slot_begin != slot_begin) {
      throw ProtocolError("session desync at round " + std::to_string(round_) + ": expected " +
                          op + "@" + std::to_string(slot_begin) + " from party " +
                          std::to_string(j) + ", got " + msg.op + "@" +
                          std::to_string(msg.slot_begin));
    }
    if (options_.hash_transcript) {
      const std::uint64_t head[] = {round_, j, self_};
      hash_.update_words(head);
      hash_.update_words(msg.words);
    }
    in[j - 1] = field().from_words(msg.words);
    if (options_.transcript == TranscriptLevel::kFull) {
      transcript_.messages.push_back(MessageRecord{round_, false, j, op, std::move(msg.words)});
    }
  }
  return in;
}

std::vector<FieldElement> Engine::reshare(std::span<const FieldElement> local, int scale,
                                          const std::string& op) {
  (void)scale;
  const std::size_t n = options_.policy.parties;
  const bool contributor = self_ <= mul_parties_.size();
  std::vector<std::vector<FieldElement>> out(n);
  std::vector<FieldElement> own;
  if (contributor) {
    for (auto& v : out) v.reserve(local.size());
    own.reserve(local.size());
    std::vector<FieldElement> tmp(n);
    for (FieldElement p : local) {
      shamir::share_values(field(), p, options_.policy, rng_, tmp);
      for (std::size_t j = 0; j < n; ++j) {
        if (j + 1 == self_) {
          own.push_back(tmp[j]);
        } else {
          out[j].push_back(tmp[j]);
        }
      }
    }
  }
  auto in = exchange(op, next_slot_, local.size(), out);
  std::vector<FieldElement> result(local.size(), field().zero());
  for (std::size_t c = 0; c < mul_parties_.size(); ++c) {
    const PartyIndex from = mul_parties_[c];
    const std::vector<FieldElement>& src = from == self_ ? own : in[from - 1];
    if (src.size() != local.size()) {
      throw ProtocolError(op + ": party " + std::to_string(from) + " sent " +
                          std::to_string(src.size()) + " shares, expected " +
                          std::to_string(local.size()));
    }
    for (std::size_t k = 0; k < local.size(); ++k) {
      result[k] = field().add(result[k], field().mul(mul_weights_[c], src[k]));
    }
  }
  return result;
}

std::vector<FieldElement> Engine::open_raw(std::span<const FieldElement> shares,
                                           OpenKind kind, const std::string& op) {
  const std::size_t n = options_.policy.parties;
  const std::uint64_t slot_begin = next_slot_;
  std::vector<std::vector<FieldElement>> out(
      n, std::vector<FieldElement>(shares.begin(), shares.end()));
  auto in = exchange(op, slot_begin, shares.size(), out);
  in[self_ - 1].assign(shares.begin(), shares.end());
  for (std::size_t j = 0; j < n; ++j) {
    if (in[j].size() != shares.size()) {
      throw ProtocolError(op + ": party " + std::to_string(j + 1) + " opened " +
                          std::to_string(in[j].size()) + " values, expected " +
                          std::to_string(shares.size()));
    }
  }
  const std::size_t d1 = options_.policy.reconstruct_count();
  std::vector<FieldElement> values(shares.size());
  for (std::size_t k = 0; k < shares.size(); ++k) {
    FieldElement secret = field().zero();
    for (std::size_t i = 0; i < d1; ++i) {
      secret = field().add(secret, field().mul(open_weights_[i], in[i][k]));
    }
    // Degree safety: the remaining shares must lie on the same polynomial.
    for (std::size_t j = d1; j < n; ++j) {
      FieldElement expected = field().zero();
      for (std::size_t i = 0; i < d1; ++i) {
        expected = field().add(expected, field().mul(check_weights_[j - d1][i], in[i][k]));
      }
      if (expected != in[j][k]) {
        throw ProtocolError(op + ": opened shares do not lie on a degree-" +
                            std::to_string(options_.policy.degree) + " polynomial");
      }
    }
    values[k] = secret;
  }
  transcript_.opens.push_back(OpenRecord{round_, kind, op, slot_begin, values});
  return values;
}

std::vector<Secret> Engine::mul(std::span<const Secret> a, std::span<const Secret> b) {
  require_same_size(a.size(), b.size(), "mul");
  OpScope scope(*this, "mul");
  std::vector<FieldElement> local(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) local[k] = field().mul(a[k].share, b[k].share);
  auto shares = reshare(local, 0, "mul");
  std::vector<Secret> out;
  out.reserve(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) out.push_back(make(shares[k], a[k].scale + b[k].scale));
  return out;
}

Secret Engine::mul(const Secret& a, const Secret& b) {
  return mul(std::span<const Secret>(&a, 1), std::span<const Secret>(&b, 1)).front();
}

Secret Engine::inner_product(std::span<const Secret> a, std::span<const Secret> b) {
  std::vector<std::vector<Secret>> av{std::vector<Secret>(a.begin(), a.end())};
  std::vector<std::vector<Secret>> bv{std::vector<Secret>(b.begin(), b.end())};
  return inner_products(av, bv).front();
}

std::vector<Secret> Engine::inner_products(const std::vector<std::vector<Secret>>& a,
                                           const std::vector<std::vector<Secret>>& b) {
  require_same_size(a.size(), b.size(), "inner_product");
  OpScope scope(*this, "inner_product");
  std::vector<FieldElement> local(a.size(), field().zero());
  std::vector<int> scales(a.size());
  for (std::size_t v = 0; v < a.size(); ++v) {
    require_same_size(a[v].size(), b[v].size(), "inner_product");
    if (a[v].empty()) throw MalformedInput("inner_product: empty vectors");
    scales[v] = a[v][0].scale + b[v][0].scale;
    for (std::size_t j = 0; j < a[v].size(); ++j) {
      if (a[v][j].scale + b[v][j].scale != scales[v]) {
        throw ProtocolError("inner_product: scale mismatch");
      }
      local[v] = field().add(local[v], field().mul(a[v][j].share, b[v][j].share));
    }
  }
  auto shares = reshare(local, 0, "inner_product");
  std::vector<Secret> out;
  out.reserve(a.size());
  for (std::size_t v = 0; v < a.size(); ++v) out.push_back(make(shares[v], scales[v]));
  return out;
}

std::vector<Secret> Engine::rand_elements(std::size_t count) {
  OpScope scope(*this, "rand_element");
  const std::size_t n = options_.policy.parties;
  std::vector<std::vector<FieldElement>> out(n);
  std::vector<FieldElement> acc(count);
  std::vector<FieldElement> tmp(n);
  for (std::size_t k = 0; k < count; ++k) {
    shamir::share_values(field(), rng_.uniform(field()), options_.policy, rng_, tmp);
    for (std::size_t j = 0; j < n; ++j) {
      if (j + 1 == self_) {
        acc[k] = tmp[j];
      } else {
        out[j].push_back(tmp[j]);
      }
    }
  }
  auto in = exchange("rand_element", next_slot_, count, out);
  for (std::size_t j = 0; j < n; ++j) {
    if (j + 1 == self_) continue;
    if (in[j].size() != count) throw ProtocolError("rand_element: wrong contribution count");
    for (std::size_t k = 0; k < count; ++k) acc[k] = field().add(acc[k], in[j][k]);
  }
  std::vector<Secret> result;
  result.reserve(count);
  for (FieldElement s : acc) result.push_back(make(s, 0));
  return result;
}

Engine::MaskBatch Engine::make_masks(std::span<const int> low_bits,
                                     std::span<const int> high_bits) {
  require_same_size(low_bits.size(), high_bits.size(), "make_masks");
  const std::size_t n = options_.policy.parties;
  const std::size_t masks = low_bits.size();
  MaskBatch batch;
  batch.low_bits.assign(low_bits.begin(), low_bits.end());
  batch.bit_offset.resize(masks);
  std::size_t total_bits = 0;
  for (std::size_t i = 0; i < masks; ++i) {
    batch.bit_offset[i] = total_bits;
    total_bits += static_cast<std::size_t>(low_bits[i]);
  }

  // Round 1: every party shares a random element per bit and a bounded random
  // integer per mask; the sums are the joint values.
  std::vector<std::size_t> high_index;
  for (std::size_t i = 0; i < masks; ++i) {
    if (high_bits[i] > 0) high_index.push_back(i);
  }
  std::vector<FieldElement> r(total_bits);
  std::vector<FieldElement> high(masks, field().zero());
  {
    std::vector<std::vector<FieldElement>> out(n);
    std::vector<FieldElement> own;
    own.reserve(total_bits + high_index.size());
    std::vector<FieldElement> tmp(n);
    auto contribute = [&](FieldElement v) {
      shamir::share_values(field(), v, options_.policy, rng_, tmp);
      for (std::size_t j = 0; j < n; ++j) {
        if (j + 1 == self_) {
          own.push_back(tmp[j]);
        } else {
          out[j].push_back(tmp[j]);
        }
      }
    };
    const bool xor_bits = options_.bit_source == BitSource::kXorContributions;
    for (std::size_t k = 0; k < total_bits; ++k) {
      contribute(xor_bits ? field().element(rng_.next_u64() & 1) : rng_.uniform(field()));
    }
    for (std::size_t i : high_index) {
      contribute(field().element(rng_.uniform_bits(high_bits[i])));
    }
    auto in = exchange("rand", next_slot_, own.size(), out);
    in[self_ - 1] = std::move(own);
    for (std::size_t j = 0; j < n; ++j) {
      if (in[j].size() != total_bits + high_index.size()) {
        throw ProtocolError("rand: wrong contribution count from party " + std::to_string(j + 1));
      }
      for (std::size_t h = 0; h < high_index.size(); ++h) {
        high[high_index[h]] = field().add(high[high_index[h]], in[j][total_bits + h]);
      }
    }
    if (xor_bits) {
      batch.bits = xor_contributions(in, total_bits);
      finish_masks(batch, high);
      return batch;
    }
    for (std::size_t j = 0; j < n; ++j) {
      for (std::size_t k = 0; k < total_bits; ++k) r[k] = field().add(r[k], in[j][k]);
    }
  }

  // Rounds 2-3: square and open. r^2 reveals nothing about the sign of r, so
  // r / sqrt(r^2) is a uniform +-1.
  std::vector<FieldElement> roots(total_bits);
  std::vector<std::size_t> pending(total_bits);
  std::iota(pending.begin(), pending.end(), 0);
  for (int attempt = 0; !pending.empty(); ++attempt) {
    if (attempt > options_.max_bit_retries) {
      throw TransientError("random bit generation exhausted " +
                           std::to_string(options_.max_bit_retries) + " retries");
    }
    if (attempt > 0) {
      // Fresh random elements for the positions whose square opened to zero.
      auto fresh = rand_elements(pending.size());
      for (std::size_t i = 0; i < pending.size(); ++i) r[pending[i]] = fresh[i].share;
    }
    std::vector<FieldElement> local(pending.size());
    for (std::size_t i = 0; i < pending.size(); ++i) {
      local[i] = field().mul(r[pending[i]], r[pending[i]]);
    }
    auto squares = reshare(local, 0, "rand_square");
    auto opened = open_raw(squares, OpenKind::kMasked, "rand_open");
    std::vector<std::size_t> retry;
    for (std::size_t i = 0; i < pending.size(); ++i) {
      if (opened[i].is_zero()) {
        retry.push_back(pending[i]);
        continue;
      }
      auto root = field().sqrt(opened[i]);
      if (!root) throw ProtocolError("rand: opened square has no root");
      roots[pending[i]] = *root;
    }
    pending = std::move(retry);
  }
  field().batch_inv(roots);

  batch.bits.reserve(total_bits);
  for (std::size_t k = 0; k < total_bits; ++k) {
    const FieldElement sign = field().mul(r[k], roots[k]);
    batch.bits.push_back(make(field().mul(field().add(sign, field().one()), inv2_), 0));
  }
  finish_masks(batch, high);
  return batch;
}

std::vector<Secret> Engine::xor_contributions(
    const std::vector<std::vector<FieldElement>>& in, std::size_t count) {
  // Pairwise a ^ b = a + b - 2ab, one multiplication round per tree level.
  std::vector<std::vector<FieldElement>> level;
  for (const auto& contribution : in) {
    level.emplace_back(contribution.begin(), contribution.begin() + count);
  }
  const FieldElement minus2 = field().neg(field().element(2));
  while (level.size() > 1) {
    const std::size_t pairs = level.size() / 2;
    std::vector<FieldElement> local(pairs * count);
    for (std::size_t p = 0; p < pairs; ++p) {
      for (std::size_t k = 0; k < count; ++k) {
        local[p * count + k] = field().mul(level[2 * p][k], level[2 * p + 1][k]);
      }
    }
    auto products = reshare(local, 0, "rand_xor");
    std::vector<std::vector<FieldElement>> next;
    for (std::size_t p = 0; p < pairs; ++p) {
      std::vector<FieldElement> v(count);
      for (std::size_t k = 0; k < count; ++k) {
        v[k] = field().add(field().add(level[2 * p][k], level[2 * p + 1][k]),
                           field().mul(minus2, products[p * count + k]));
      }
      next.push_back(std::move(v));
    }
    if (level.size() % 2 == 1) next.push_back(std::move(level.back()));
    level = std::move(next);
  }
  std::vector<Secret> bits;
  bits.reserve(count);
  for (FieldElement s : level.front()) bits.push_back(make(s, 0));
  return bits;
}

void Engine::finish_masks(MaskBatch& batch, const std::vector<FieldElement>& high) {
  const std::size_t masks = batch.low_bits.size();
  const auto& low_bits = batch.low_bits;
  batch.low.reserve(masks);
  batch.full.reserve(masks);
  for (std::size_t i = 0; i < masks; ++i) {
    FieldElement low = field().zero();
    for (int j = 0; j < low_bits[i]; ++j) {
      low = field().add(low,
                        field().mul(batch.bits[batch.bit_offset[i] + j].share, field().pow2(j)));
    }
    batch.low.push_back(make(low, 0));
    batch.full.push_back(
        make(field().add(field().mul(high[i], field().pow2(low_bits[i])), low), 0));
  }
}

std::vector<Secret> Engine::rand_bits(std::size_t count) {
  OpScope scope(*this, "rand_bit");
  std::vector<int> ones(count, 1);
  std::vector<int> zeros(count, 0);
  return make_masks(ones, zeros).bits;
}

void Engine::check_headroom(int value_bits, const char* op) const {
  const int needed = value_bits + options_.kappa +
                     ceil_log2(options_.policy.parties) + 2;
  if (needed >= field().bits()) {
    throw ConfigError(std::string(op) + ": " + std::to_string(value_bits) +
                      "-bit operands with kappa=" + std::to_string(options_.kappa) +
                      " need a field above " + std::to_string(needed) + " bits");
  }
}

void Engine::debug_range_check(std::span<const Secret> a, int bits, const char* op) {
  if (!options_.debug) return;
  std::vector<FieldElement> shares;
  for (const Secret& s : a) shares.push_back(s.share);
  auto values = open_raw(shares, OpenKind::kDebug, "debug_range");
  const i128 bound = static_cast<i128>(1) << bits;
  for (FieldElement v : values) {
    const i128 sv = field().to_signed(v);
    if (sv >= bound || sv <= -bound) {
      throw RangeError(std::string(op) + ": operand outside +-2^" + std::to_string(bits));
    }
  }
}

std::vector<Secret> Engine::trunc_with(std::span<const Secret> a, std::span<const int> k,
                                       int input_bits, const MaskBatch& masks,
                                       std::size_t mask_offset) {
  require_same_size(a.size(), k.size(), "trunc");
  std::vector<FieldElement> masked(a.size());
  const FieldElement offset = field().pow2(input_bits);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (k[i] < 0 || k[i] > input_bits || k[i] > a[i].scale) {
      throw ProtocolError("trunc: shift " + std::to_string(k[i]) + " invalid for scale " +
                          std::to_string(a[i].scale));
    }
    masked[i] = field().add(field().add(a[i].share, offset), masks.full[mask_offset + i].share);
  }
  auto opened = open_raw(masked, OpenKind::kMasked, "trunc_open");
  std::vector<Secret> out;
  out.reserve(a.size());
  int cached_k = -1;
  FieldElement inv_pow = field().one();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (k[i] != cached_k) {
      cached_k = k[i];
      inv_pow = field().inv(field().pow2(k[i]));
    }
    const FieldElement c_low = field().element(low_bits_of(opened[i], k[i]));
    FieldElement t = field().add(a[i].share, offset);
    t = field().add(t, masks.low[mask_offset + i].share);
    t = field().sub(t, c_low);
    t = field().mul(t, inv_pow);
    t = field().sub(t, field().pow2(input_bits - k[i]));
    out.push_back(make(t, a[i].scale - k[i]));
  }
  return out;
}

std::vector<Secret> Engine::trunc(std::span<const Secret> a, std::span<const int> k,
                                  int input_bits) {
  OpScope scope(*this, "trunc");
  if (input_bits <= 0) input_bits = default_trunc_bits();
  check_headroom(input_bits, "trunc");
  debug_range_check(a, input_bits, "trunc");
  std::vector<int> high(k.size());
  for (std::size_t i = 0; i < k.size(); ++i) high[i] = input_bits + options_.kappa - k[i];
  auto masks = make_masks(k, high);
  return trunc_with(a, k, input_bits, masks, 0);
}

std::vector<Secret> Engine::trunc(std::span<const Secret> a, int k, int input_bits) {
  std::vector<int> ks(a.size(), k);
  return trunc(a, ks, input_bits);
}

Secret Engine::trunc(const Secret& a, int k, int input_bits) {
  return trunc(std::span<const Secret>(&a, 1), k, input_bits).front();
}

int Engine::comparison_rounds(int bits) {
  // masks (3) + masked opening (1) + log-depth suffix products
  return 3 + 1 + ceil_log2(static_cast<std::uint64_t>(bits));
}

std::vector<Secret> Engine::greater_equal_with(std::span<const Secret> a,
                                               std::span<const Secret> b, int bits,
                                               const MaskBatch& masks,
                                               std::size_t mask_offset) {
  require_same_size(a.size(), b.size(), "greater_equal");
  const std::size_t count = a.size();
  const FieldElement offset = field().pow2(bits);
  std::vector<Secret> z;
  z.reserve(count);
  std::vector<FieldElement> masked(count);
  for (std::size_t i = 0; i < count; ++i) {
    if (a[i].scale != b[i].scale) throw ProtocolError("greater_equal: scale mismatch");
    z.push_back(add_public(sub(a[i], b[i]), offset));
    masked[i] = field().add(z[i].share, masks.full[mask_offset + i].share);
  }
  auto opened = open_raw(masked, OpenKind::kMasked, "cmp_open");

  // q_j = [c_j == r_j]; suffix products P_j = prod_{l >= j} q_l mark the
  // positions above the most significant differing bit.
  const std::size_t m = static_cast<std::size_t>(bits);
  std::vector<std::vector<Secret>> prefix(count);
  std::vector<u128> c_low(count);
  for (std::size_t i = 0; i < count; ++i) {
    c_low[i] = low_bits_of(opened[i], bits);
    const std::size_t base = masks.bit_offset[mask_offset + i];
    prefix[i].reserve(m);
    for (std::size_t j = 0; j < m; ++j) {
      const Secret& r = masks.bits[base + j];
      const bool c_bit = (c_low[i] >> j) & 1;
      prefix[i].push_back(c_bit ? r : add_public(neg(r), field().one()));
    }
  }
  for (std::size_t step = 1; step < m; step *= 2) {
    std::vector<Secret> lhs, rhs;
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t j = 0; j + step < m; ++j) {
        lhs.push_back(prefix[i][j]);
        rhs.push_back(prefix[i][j + step]);
      }
    }
    auto products = mul(lhs, rhs);
    std::size_t p = 0;
    for (std::size_t i = 0; i < count; ++i) {
      for (std::size_t j = 0; j + step < m; ++j) prefix[i][j] = products[p++];
    }
  }

  std::vector<Secret> out;
  out.reserve(count);
  const FieldElement inv_pow = field().inv(offset);
  for (std::size_t i = 0; i < count; ++i) {
    // u = [c_low < r_low] = sum_j (1 - c_j) (P_{j+1} - P_j)
    FieldElement u = field().zero();
    for (std::size_t j = 0; j < m; ++j) {
      if ((c_low[i] >> j) & 1) continue;
      const FieldElement upper = j + 1 < m ? prefix[i][j + 1].share : field().one();
      u = field().add(u, field().sub(upper, prefix[i][j].share));
    }
    FieldElement t = field().sub(z[i].share, field().element(c_low[i]));
    t = field().add(t, masks.low[mask_offset + i].share);
    t = field().sub(t, field().mul(offset, u));
    out.push_back(make(field().mul(t, inv_pow), 0));
  }
  return out;
}

std::vector<Secret> Engine::greater_equal(std::span<const Secret> a,
                                          std::span<const Secret> b, int bits) {
  require_same_size(a.size(), b.size(), "greater_equal");
  OpScope scope(*this, "greater_equal");
  if (a.empty()) return {};
  if (bits <= 0) bits = codec_.int_bits() + a[0].scale;
  check_headroom(bits + 1, "greater_equal");
  if (options_.debug) {
    std::vector<Secret> diff;
    for (std::size_t i = 0; i < a.size(); ++i) diff.push_back(sub(a[i], b[i]));
    debug_range_check(diff, bits, "greater_equal");
  }
  std::vector<int> low(a.size(), bits);
  std::vector<int> high(a.size(), options_.kappa);
  auto masks = make_masks(low, high);
  return greater_equal_with(a, b, bits, masks, 0);
}

Secret Engine::greater_equal(const Secret& a, const Secret& b, int bits) {
  return greater_equal(std::span<const Secret>(&a, 1), std::span<const Secret>(&b, 1), bits)
      .front();
}

std::vector<Secret> Engine::secure_sqrt(std::span<const Secret> a) {
  OpScope scope(*this, "secure_sqrt");
  if (a.empty()) return {};
  const int f = codec_.frac_bits();
  for (const Secret& s : a) {
    if (s.scale != f) throw ProtocolError("secure_sqrt: operand scale must be frac_bits");
  }
  const int input_bits = default_trunc_bits();
  check_headroom(input_bits, "secure_sqrt");

  // Public linear initial guess y0 = alpha (B' - a) with alpha chosen so that
  // y0 * sqrt(a) stays below sqrt(3) on [lower, upper].
  const double lower = options_.sqrt.lower;
  const double upper = options_.sqrt.upper;
  const double bp = upper * 1.02;
  auto g = [bp](double x) { return (bp - x) * std::sqrt(x); };
  double peak = std::max(g(lower), g(upper));
  if (bp / 3 > lower && bp / 3 < upper) peak = std::max(peak, g(bp / 3));
  const double alpha = std::sqrt(3.0) * 0.97 / peak;

  const std::size_t count = a.size();
  const int iters = options_.sqrt.iterations;
  const std::size_t stages = 2 + 3 * static_cast<std::size_t>(iters);
  std::vector<int> ks;
  ks.reserve(stages * count);
  auto push_stage = [&](int k) { ks.insert(ks.end(), count, k); };
  push_stage(f);
  for (int it = 0; it < iters; ++it) {
    push_stage(f);
    push_stage(f);
    push_stage(f + 1);
  }
  push_stage(f);
  std::vector<int> high(ks.size());
  for (std::size_t i = 0; i < ks.size(); ++i) high[i] = input_bits + options_.kappa - ks[i];
  const MaskBatch masks = make_masks(ks, high);
  std::size_t offset = 0;
  auto stage_trunc = [&](std::span<const Secret> v, int k) {
    std::vector<int> kv(v.size(), k);
    auto out = trunc_with(v, kv, input_bits, masks, offset);
    offset += v.size();
    return out;
  };

  const FieldElement neg_alpha = codec_.encode_scaled(-alpha, f);
  const FieldElement alpha_bp = codec_.encode_scaled(alpha * bp, 2 * f);
  std::vector<Secret> y0(count);
  for (std::size_t i = 0; i < count; ++i) {
    y0[i] = add_public(mul_public(a[i], neg_alpha, f), alpha_bp);
  }
  std::vector<Secret> y = stage_trunc(y0, f);
  const FieldElement three = codec_.encode_scaled(3.0, f);
  for (int it = 0; it < iters; ++it) {
    auto y2 = stage_trunc(mul(y, y), f);
    auto ay2 = stage_trunc(mul(a, y2), f);
    std::vector<Secret> t(count);
    for (std::size_t i = 0; i < count; ++i) t[i] = add_public(neg(ay2[i]), three);
    // y (3 - a y^2) / 2: the halving is folded into the shift.
    y = stage_trunc(mul(y, t), f + 1);
    for (Secret& s : y) s.scale = f;
  }
  return stage_trunc(mul(a, y), f);
}

std::pair<Secret, Secret> Engine::window_min_max(std::span<const Secret> v) {
  OpScope scope(*this, "min_max");
  if (v.empty()) throw MalformedInput("window_min_max: empty vector");
  if (v.size() == 1) return {v[0], v[0]};
  const int bits = codec_.int_bits() + v[0].scale;
  check_headroom(bits + 1, "window_min_max");
  const std::size_t comparisons = 2 * (v.size() - 1);
  std::vector<int> low(comparisons, bits);
  std::vector<int> high(comparisons, options_.kappa);
  const MaskBatch masks = make_masks(low, high);
  std::size_t offset = 0;

  std::vector<Secret> maxs(v.begin(), v.end());
  std::vector<Secret> mins(v.begin(), v.end());
  while (maxs.size() > 1) {
    const std::size_t pairs = maxs.size() / 2;
    std::vector<Secret> lhs, rhs;
    for (std::size_t p = 0; p < pairs; ++p) {
      lhs.push_back(maxs[2 * p]);
      rhs.push_back(maxs[2 * p + 1]);
    }
    for (std::size_t p = 0; p < pairs; ++p) {
      lhs.push_back(mins[2 * p]);
      rhs.push_back(mins[2 * p + 1]);
    }
    auto ge = greater_equal_with(lhs, rhs, bits, masks, offset);
    offset += lhs.size();
    // max = r + b (l - r); min = l + b (r - l)
    std::vector<Secret> diffs;
    for (std::size_t p = 0; p < pairs; ++p) diffs.push_back(sub(lhs[p], rhs[p]));
    for (std::size_t p = pairs; p < 2 * pairs; ++p) diffs.push_back(sub(rhs[p], lhs[p]));
    auto chosen = mul(ge, diffs);
    std::vector<Secret> next_max, next_min;
    for (std::size_t p = 0; p < pairs; ++p) next_max.push_back(add(rhs[p], chosen[p]));
    for (std::size_t p = 0; p < pairs; ++p) {
      next_min.push_back(add(lhs[pairs + p], chosen[pairs + p]));
    }
    if (maxs.size() % 2 == 1) {
      next_max.push_back(maxs.back());
      next_min.push_back(mins.back());
    }
    maxs = std::move(next_max);
    mins = std::move(next_min);
  }
  return {mins.front(), maxs.front()};
}

void Engine::mark_output(const Secret& s) { outputs_.insert(s.slot); }

std::vector<FieldElement> Engine::open(std::span<const Secret> s) {
  OpScope scope(*this, "open");
  bool all_outputs = true;
  for (const Secret& x : s) {
    if (!outputs_.count(x.slot)) {
      all_outputs = false;
      if (!options_.debug) {
        throw PolicyViolation("slot " + std::to_string(x.slot) +
                              " is not a designated output");
      }
    }
  }
  std::vector<FieldElement> shares;
  shares.reserve(s.size());
  for (const Secret& x : s) shares.push_back(x.share);
  return open_raw(shares, all_outputs ? OpenKind::kOutput : OpenKind::kDebug, "open");
}

FieldElement Engine::open(const Secret& s) {
  return open(std::span<const Secret>(&s, 1)).front();
}

}  // namespace falldet::mpc
