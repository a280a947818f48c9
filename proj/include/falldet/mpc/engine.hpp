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

#ifndef FALLDET_MPC_ENGINE_HPP_
#define FALLDET_MPC_ENGINE_HPP_

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "falldet/digest.hpp"
#include "falldet/fixed_point.hpp"
#include "falldet/mpc/channel.hpp"
#include "falldet/mpc/round_counter.hpp"
#include "falldet/random.hpp"
#include "falldet/shamir.hpp"

namespace falldet::mpc {

// This party's share of a secret-shared value. `scale` is the number of
// fractional bits the value carries; `slot` is the position of the value in
// the deterministic schedule, identical on every party.
struct Secret {
  FieldElement share;
  int scale = 0;
  std::uint64_t slot = 0;
};

enum class OpenKind {
  kMasked,  // value hidden by a random mask or a fresh random square
  kOutput,  // designated protocol output (the label)
  kDebug,   // debug-mode inspection
};

std::string to_string(OpenKind kind);

struct OpenRecord {
  std::uint64_t round = 0;
  OpenKind kind = OpenKind::kMasked;
  std::string op;
  std::uint64_t slot_begin = 0;
  std::vector<FieldElement> values;
};

struct MessageRecord {
  std::uint64_t round = 0;
  bool sent = false;
  PartyIndex peer = 0;
  std::string op;
  std::vector<std::uint64_t> words;
};

enum class TranscriptLevel { kOpens, kFull };

// What one party observed during a session.
struct Transcript {
  std::vector<OpenRecord> opens;
  std::vector<MessageRecord> messages;  // only at TranscriptLevel::kFull
  std::set<std::uint64_t> rounds;       // distinct exchange rounds seen
};

// Initial guess and iteration count for the inverse-square-root Newton
// iteration y <- y (3 - a y^2) / 2.
struct SqrtOptions {
  double lower = 1.0 / 16.0;
  double upper = 192.0;
  int iterations = 10;
};

// How shared random bits are produced. Both take three rounds with three
// parties.
enum class BitSource {
  kXorContributions,  // every party deals a private bit; the bits are XORed
  kSquareRoot,        // r / sqrt(r^2) for a jointly random r
};

struct EngineOptions {
  shamir::SharingPolicy policy;
  int kappa = 40;
  bool debug = false;
  SqrtOptions sqrt;
  BitSource bit_source = BitSource::kXorContributions;
  int max_bit_retries = 8;
  TranscriptLevel transcript = TranscriptLevel::kOpens;
  // Running SHA-256 over every message sent and received.
  bool hash_transcript = false;
};

// The per-(party, session) protocol engine. All parties must issue the same
// sequence of calls; interactive calls block on the channel. Vector overloads
// run their whole batch in the rounds a single call would take.
class Engine {
 public:
  Engine(FixedPointCodec codec, EngineOptions options, PartyIndex self,
         Channel& channel, RandomSource& rng);

  PartyIndex self() const { return self_; }
  const Field& field() const { return codec_.field(); }
  const FixedPointCodec& codec() const { return codec_; }
  const EngineOptions& options() const { return options_; }
  RoundCounter& counter() { return counter_; }
  const RoundCounter& counter() const { return counter_; }
  const Transcript& transcript() const { return transcript_; }
  // SHA-256 over every message sent and received, in protocol order.
  std::string transcript_hash() const { return hash_.hex(); }

  // --- local operations (zero rounds) ---

  // Wraps a share this party received from the data owner.
  Secret input(FieldElement share, int scale);
  // Degree-0 sharing of a public value.
  Secret constant(FieldElement value, int scale);
  Secret add(const Secret& a, const Secret& b);
  Secret sub(const Secret& a, const Secret& b);
  Secret neg(const Secret& a);
  // a + c; c must already carry a's scale.
  Secret add_public(const Secret& a, FieldElement c);
  // a * c; the result scale is a.scale + c_scale.
  Secret mul_public(const Secret& a, FieldElement c, int c_scale = 0);
  // Sum of a_j * c_j with public c, result scale a.scale + c_scale.
  Secret dot_public(std::span<const Secret> a, std::span<const FieldElement> c,
                    int c_scale);

  // --- interactive operations ---

  // One round: local products, re-sharing, Lagrange recombination.
  std::vector<Secret> mul(std::span<const Secret> a, std::span<const Secret> b);
  Secret mul(const Secret& a, const Secret& b);

  // One round regardless of length: local dot product, one re-sharing.
  Secret inner_product(std::span<const Secret> a, std::span<const Secret> b);
  // Several inner products in the same single round.
  std::vector<Secret> inner_products(const std::vector<std::vector<Secret>>& a,
                                     const std::vector<std::vector<Secret>>& b);

  // One round; uniformly random elements nobody knows.
  std::vector<Secret> rand_elements(std::size_t count);
  // Three rounds; shared uniform bits.
  std::vector<Secret> rand_bits(std::size_t count);

  // floor(a / 2^k) up to +1 ulp, for |a| < 2^input_bits. input_bits <= 0
  // selects the default bound 2 * (int_bits + frac_bits).
  std::vector<Secret> trunc(std::span<const Secret> a, int k, int input_bits = 0);
  std::vector<Secret> trunc(std::span<const Secret> a, std::span<const int> k,
                            int input_bits = 0);
  Secret trunc(const Secret& a, int k, int input_bits = 0);

  // Shared bit [a >= b] for |a - b| < 2^bits. bits <= 0 selects
  // int_bits + scale of the operands.
  std::vector<Secret> greater_equal(std::span<const Secret> a,
                                    std::span<const Secret> b, int bits = 0);
  Secret greater_equal(const Secret& a, const Secret& b, int bits = 0);

  // Square roots of fixed-point values in [sqrt.lower, sqrt.upper].
  std::vector<Secret> secure_sqrt(std::span<const Secret> a);

  // (min, max) of a non-empty vector via two balanced comparison trees.
  std::pair<Secret, Secret> window_min_max(std::span<const Secret> v);

  // Marks a slot as a designated output that open() may reveal.
  void mark_output(const Secret& s);
  // One round. Outside debug mode only slots marked as outputs may be opened.
  FieldElement open(const Secret& s);
  std::vector<FieldElement> open(std::span<const Secret> s);

  // Rounds a single bit-comparison takes for the given bound (static).
  static int comparison_rounds(int bits);

 private:
  struct MaskBatch {
    std::vector<int> low_bits;
    std::vector<std::size_t> bit_offset;  // into bits
    std::vector<Secret> bits;
    std::vector<Secret> low;   // sum 2^j b_j
    std::vector<Secret> full;  // high * 2^low_bits + low
  };

  class OpScope {
   public:
    OpScope(Engine& e, const char* name);
    ~OpScope();

   private:
    Engine& engine_;
  };

  Secret make(FieldElement share, int scale);
  std::uint64_t peek_slot() const { return next_slot_; }

  // Sends out[j - 1] to every peer j and returns what each peer sent, indexed
  // by party - 1 (this party's entry is left empty).
  std::vector<std::vector<FieldElement>> exchange(
      const std::string& op, std::uint64_t slot_begin, std::uint64_t slot_count,
      const std::vector<std::vector<FieldElement>>& out);
  std::vector<FieldElement> reshare(std::span<const FieldElement> local, int scale,
                                    const std::string& op);
  std::vector<FieldElement> open_raw(std::span<const FieldElement> shares, OpenKind kind,
                                     const std::string& op);

  MaskBatch make_masks(std::span<const int> low_bits, std::span<const int> high_bits);
  std::vector<Secret> xor_contributions(const std::vector<std::vector<FieldElement>>& in,
                                        std::size_t count);
  void finish_masks(MaskBatch& batch, const std::vector<FieldElement>& high);
  std::vector<Secret> trunc_with(std::span<const Secret> a, std::span<const int> k,
                                 int input_bits, const MaskBatch& masks,
                                 std::size_t mask_offset);
  std::vector<Secret> greater_equal_with(std::span<const Secret> a,
                                         std::span<const Secret> b, int bits,
                                         const MaskBatch& masks, std::size_t mask_offset);
  int default_trunc_bits() const { return 2 * codec_.value_bits(); }
  void check_headroom(int value_bits, const char* op) const;
  void debug_range_check(std::span<const Secret> a, int bits, const char* op);

  FixedPointCodec codec_;
  EngineOptions options_;
  PartyIndex self_;
  Channel& channel_;
  RandomSource& rng_;

  std::vector<PartyIndex> mul_parties_;
  std::vector<FieldElement> mul_weights_;
  std::vector<PartyIndex> all_parties_;
  std::vector<FieldElement> open_weights_;                // f(0) from parties 1..d+1
  std::vector<std::vector<FieldElement>> check_weights_;  // f(j) for j = d+2..n
  FieldElement inv2_;

  std::uint64_t round_ = 0;
  std::uint64_t next_slot_ = 1;
  std::vector<std::string> op_stack_;
  std::set<std::uint64_t> outputs_;
  RoundCounter counter_;
  Transcript transcript_;
  Sha256 hash_;
};

}  // namespace falldet::mpc

#endif  // FALLDET_MPC_ENGINE_HPP_
