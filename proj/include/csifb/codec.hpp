#pragma once

// UE encoder and BS decoder over a bit-exact feedback frame. Indices are
// packed in ascending component order, each index MSB-first in its b_n bits;
// a frame is decodable only against the exact (model, codebook, allocation)
// triple it was produced with, enforced by a 64-bit fingerprint.
//
// Frame wire format: model_id u64 LE, B u32 LE, ceil(B/8) payload bytes with
// zero tail padding.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "csifb/errors.hpp"
#include "csifb/grid.hpp"
#include "csifb/hash.hpp"
#include "csifb/quantizer.hpp"

namespace csifb {

namespace detail {

class BitWriter {
 public:
  void put(std::uint32_t value, int nbits) {
    for (int i = nbits - 1; i >= 0; --i) {
      const int bit = static_cast<int>((value >> i) & 1u);
      if (fill_ == 0) bytes_.push_back(0);
      bytes_.back() = static_cast<std::uint8_t>(bytes_.back() | (bit << (7 - fill_)));
      fill_ = (fill_ + 1) % 8;
    }
    total_ += nbits;
  }
  std::vector<std::uint8_t> take() { return std::move(bytes_); }
  int bit_count() const { return total_; }

 private:
  std::vector<std::uint8_t> bytes_;
  int fill_ = 0;
  int total_ = 0;
};

class BitReader {
 public:
  BitReader(const std::vector<std::uint8_t>& bytes, int nbits)
      : bytes_(bytes), nbits_(nbits) {}

  std::uint32_t get(int nbits) {
    std::uint32_t v = 0;
    for (int i = 0; i < nbits; ++i) {
      if (at_ >= nbits_) throw MismatchError("frame underrun");
      const std::uint8_t byte = bytes_[static_cast<std::size_t>(at_ / 8)];
      v = (v << 1) | ((byte >> (7 - at_ % 8)) & 1u);
      ++at_;
    }
    return v;
  }

 private:
  const std::vector<std::uint8_t>& bytes_;
  int nbits_;
  int at_ = 0;
};

}  // namespace detail

struct FeedbackFrame {
  std::uint64_t model_id = 0;
  std::uint32_t bit_count = 0;                // B
  std::vector<std::uint8_t> payload;          // ceil(B/8) bytes, zero tail
};

// Everything one side needs to encode or decode: the reconstructed basis, the
// training mean, the codebook and the allocation in use. Both sides must be
// assembled from the same offloaded artifacts; model_id pins that.
struct CodecState {
  Eigen::MatrixXcd v_hat;    // D x N_P (columns >= alloc.latent_dim)
  Eigen::RowVectorXcd mean;  // length D
  GridDims dims;
  Codebook codebook;
  BitAllocation alloc;
  std::uint64_t model_id = 0;
};

inline std::uint64_t codec_fingerprint(const CodecState& s) {
  ByteSink sink;
  sink.put(s.dims.n_x);
  sink.put(s.dims.n_y);
  sink.put(s.dims.n_c);
  sink.put(s.alloc.total);
  sink.put_range(s.alloc.bits.data(), s.alloc.bits.size());
  sink.put_range(s.alloc.order.data(), s.alloc.order.size());
  sink.put_range(s.v_hat.data(), static_cast<std::size_t>(s.v_hat.size()));
  sink.put_range(s.mean.data(), static_cast<std::size_t>(s.mean.size()));
  sink.put(static_cast<std::uint8_t>(s.codebook.variant));
  if (s.codebook.variant == Codebook::Variant::kShared) {
    sink.put_range(s.codebook.sigma.data(), static_cast<std::size_t>(s.codebook.sigma.size()));
    for (const auto& set : s.codebook.shared_levels) {
      sink.put_range(set.data(), set.size());
    }
  } else {
    for (const auto& comp : s.codebook.levels) {
      for (const auto& set : comp) sink.put_range(set.data(), set.size());
    }
  }
  return sink.hash();
}

inline CodecState make_codec_state(Eigen::MatrixXcd v_hat, Eigen::RowVectorXcd mean,
                                   GridDims dims, Codebook codebook,
                                   BitAllocation alloc) {
  if (v_hat.cols() < alloc.latent_dim) {
    throw std::invalid_argument("codec state: basis has fewer columns than N_P");
  }
  if (v_hat.cols() > 0 && v_hat.rows() != dims.flat_size()) {
    throw std::invalid_argument("codec state: basis rows != N_A*N_C");
  }
  CodecState s{std::move(v_hat), std::move(mean), dims, std::move(codebook),
               std::move(alloc), 0};
  s.model_id = codec_fingerprint(s);
  return s;
}

inline FeedbackFrame encode(const Eigen::MatrixXcd& h_noisy_dl, const CodecState& state) {
  if (h_noisy_dl.rows() != state.dims.n_antennas() ||
      h_noisy_dl.cols() != state.dims.n_c) {
    throw std::invalid_argument("encode: channel dimensions do not match model");
  }
  const double target = static_cast<double>(h_noisy_dl.size());
  const double norm_sq = h_noisy_dl.squaredNorm();
  if (std::abs(norm_sq - target) > 0.01 * target) {
    throw MismatchError("encode: input channel is not normalized");
  }

  FeedbackFrame frame;
  frame.model_id = state.model_id;
  frame.bit_count = static_cast<std::uint32_t>(state.alloc.total);
  if (state.alloc.latent_dim == 0) return frame;

  const Eigen::RowVectorXcd z =
      (vectorize(h_noisy_dl) - state.mean) * state.v_hat.leftCols(state.alloc.latent_dim);
  const std::vector<int> indices = quantize(z, state.codebook, state.alloc);

  detail::BitWriter writer;
  std::size_t at = 0;
  for (int n = 0; n < state.alloc.latent_dim; ++n) {
    if (state.alloc.bits[n] == 0) continue;
    writer.put(static_cast<std::uint32_t>(indices[at++]), state.alloc.bits[n]);
  }
  frame.payload = writer.take();
  return frame;
}

inline Eigen::MatrixXcd decode(const FeedbackFrame& frame, const CodecState& state) {
  if (frame.model_id != state.model_id ||
      frame.bit_count != static_cast<std::uint32_t>(state.alloc.total)) {
    throw MismatchError("decode: frame/model mismatch");
  }
  if (state.alloc.latent_dim == 0) {
    return devectorize(state.mean, state.dims.n_antennas(), state.dims.n_c);
  }
  detail::BitReader reader(frame.payload, static_cast<int>(frame.bit_count));
  std::vector<int> indices;
  for (int n = 0; n < state.alloc.latent_dim; ++n) {
    if (state.alloc.bits[n] == 0) continue;
    indices.push_back(static_cast<int>(reader.get(state.alloc.bits[n])));
  }
  const Eigen::RowVectorXcd z_bar = dequantize(indices, state.codebook, state.alloc);
  const Eigen::RowVectorXcd h_hat =
      z_bar * state.v_hat.leftCols(state.alloc.latent_dim).adjoint() + state.mean;
  return devectorize(h_hat, state.dims.n_antennas(), state.dims.n_c);
}

inline std::vector<std::uint8_t> serialize_frame(const FeedbackFrame& frame) {
  const std::size_t payload_len = (frame.bit_count + 7) / 8;
  if (frame.payload.size() != payload_len) {
    throw std::logic_error("frame payload length inconsistent with bit count");
  }
  std::vector<std::uint8_t> out(12 + payload_len);
  std::memcpy(out.data(), &frame.model_id, 8);
  std::memcpy(out.data() + 8, &frame.bit_count, 4);
  std::memcpy(out.data() + 12, frame.payload.data(), payload_len);
  return out;
}

inline FeedbackFrame parse_frame(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 12) throw MismatchError("frame too short");
  FeedbackFrame frame;
  std::memcpy(&frame.model_id, bytes.data(), 8);
  std::memcpy(&frame.bit_count, bytes.data() + 8, 4);
  const std::size_t payload_len = (frame.bit_count + 7) / 8;
  if (bytes.size() != 12 + payload_len) {
    throw MismatchError("frame length does not match bit count");
  }
  frame.payload.assign(bytes.begin() + 12, bytes.end());
  // Tail padding must be zero.
  const int tail = static_cast<int>(payload_len * 8 - frame.bit_count);
  if (tail > 0 && (frame.payload.back() & ((1u << tail) - 1u)) != 0) {
    throw MismatchError("frame tail padding is not zero");
  }
  return frame;
}

}  // namespace csifb
