#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "softdice/rng.hpp"
#include "softdice/tensor.hpp"
#include "softdice/transitions.hpp"

namespace softdice {

enum class SampleSource : int { kExpert = 0, kOnline = 1 };

/// A sampled minibatch in struct-of-arrays form. mask holds (1 - e) per row,
/// ready for bootstrap masking. source tags which buffer each row came from.
struct Batch {
  Tensor states;
  Tensor actions;
  Tensor next_states;
  Tensor mask;  // [B x 1]
  std::vector<SampleSource> source;
  std::size_t size() const { return states.rows(); }
};

/// Expert demonstration buffer: a flat list of transitions plus the
/// per-trajectory index. Also serves as the surrogate initial-state
/// distribution: every stored state s begins a virtual trajectory, so
/// initial-state sampling is uniform over all of them.
class DemoBuffer {
 public:
  DemoBuffer() = default;

  explicit DemoBuffer(const std::vector<Trajectory>& trajectories) {
    for (const Trajectory& t : trajectories) add_trajectory(t);
  }

  static DemoBuffer from_file(const std::string& path) {
    return DemoBuffer(load_demos(path));
  }

  void add_trajectory(const Trajectory& traj) {
    if (traj.steps.empty()) return;
    const std::size_t begin = transitions_.size();
    for (const Transition& tr : traj.steps) {
      if (!transitions_.empty()) {
        if (tr.s.size() != state_dim() || tr.a.size() != action_dim())
          throw contract_error("DemoBuffer: inconsistent transition dimensions");
      }
      transitions_.push_back(tr);
    }
    traj_ranges_.emplace_back(begin, transitions_.size());
  }

  std::size_t size() const { return transitions_.size(); }
  bool empty() const { return transitions_.empty(); }
  std::size_t n_trajectories() const { return traj_ranges_.size(); }
  std::size_t state_dim() const { return transitions_.empty() ? 0 : transitions_[0].s.size(); }
  std::size_t action_dim() const { return transitions_.empty() ? 0 : transitions_[0].a.size(); }
  const Transition& transition(std::size_t i) const { return transitions_[i]; }

  /// Uniform i.i.d. with replacement over all stored transitions.
  Batch sample_transitions(std::size_t batch_size, Rng& rng) const {
    if (empty()) throw contract_error("sample_transitions: buffer is empty");
    if (batch_size == 0) throw contract_error("sample_transitions: batch_size must be >= 1");
    Batch b;
    b.states = Tensor(batch_size, state_dim());
    b.actions = Tensor(batch_size, action_dim());
    b.next_states = Tensor(batch_size, state_dim());
    b.mask = Tensor(batch_size, 1);
    b.source.assign(batch_size, SampleSource::kExpert);
    for (std::size_t i = 0; i < batch_size; ++i)
      fill_row(b, i, transitions_[rng.index(size())], SampleSource::kExpert);
    return b;
  }

  /// Uniform over the s fields of all transitions (virtual initial states),
  /// not only true episode starts.
  Tensor sample_initial_states(std::size_t batch_size, Rng& rng) const {
    if (empty()) throw contract_error("sample_initial_states: buffer is empty");
    if (batch_size == 0)
      throw contract_error("sample_initial_states: batch_size must be >= 1");
    Tensor out(batch_size, state_dim());
    for (std::size_t i = 0; i < batch_size; ++i) {
      const Transition& tr = transitions_[rng.index(size())];
      for (std::size_t j = 0; j < tr.s.size(); ++j) out(i, j) = tr.s[j];
    }
    return out;
  }

  /// All states as a [N x ds] tensor (for entropy measurement on d_E).
  Tensor all_states() const {
    Tensor out(size(), state_dim());
    for (std::size_t i = 0; i < size(); ++i)
      for (std::size_t j = 0; j < state_dim(); ++j) out(i, j) = transitions_[i].s[j];
    return out;
  }

  static void fill_row(Batch& b, std::size_t row, const Transition& tr, SampleSource src) {
    for (std::size_t j = 0; j < tr.s.size(); ++j) b.states(row, j) = tr.s[j];
    for (std::size_t j = 0; j < tr.a.size(); ++j) b.actions(row, j) = tr.a[j];
    for (std::size_t j = 0; j < tr.s_next.size(); ++j) b.next_states(row, j) = tr.s_next[j];
    b.mask(row, 0) = 1.0 - static_cast<double>(tr.e);
    b.source[row] = src;
  }

 private:
  std::vector<Transition> transitions_;
  std::vector<std::pair<std::size_t, std::size_t>> traj_ranges_;
};

/// FIFO ring buffer for rollout transitions (the d_RB of the mixture).
class OnlineBuffer {
 public:
  explicit OnlineBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity_ == 0) throw contract_error("OnlineBuffer: capacity must be >= 1");
  }

  void push(Transition tr) {
    if (transitions_.size() < capacity_) {
      transitions_.push_back(std::move(tr));
    } else {
      transitions_[insert_count_ % capacity_] = std::move(tr);
    }
    ++insert_count_;
  }

  std::size_t size() const { return transitions_.size(); }
  bool empty() const { return transitions_.empty(); }
  std::size_t capacity() const { return capacity_; }
  std::uint64_t insert_count() const { return insert_count_; }
  const Transition& transition(std::size_t i) const { return transitions_[i]; }

 private:
  std::size_t capacity_;
  std::uint64_t insert_count_ = 0;
  std::vector<Transition> transitions_;
};

/// Draws each element from the online buffer with probability alpha, else
/// from the expert buffer; rows are tagged with their source.
inline Batch mix_sample(const DemoBuffer& demo, const OnlineBuffer* online, double alpha,
                        std::size_t batch_size, Rng& rng) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw contract_error("mix_sample: alpha not in [0,1]");
  if (demo.empty()) throw contract_error("mix_sample: demo buffer is empty");
  if (batch_size == 0) throw contract_error("mix_sample: batch_size must be >= 1");
  if (alpha > 0.0 && (online == nullptr || online->empty()))
    throw contract_error("mix_sample: alpha > 0 requires a non-empty online buffer");

  Batch b;
  b.states = Tensor(batch_size, demo.state_dim());
  b.actions = Tensor(batch_size, demo.action_dim());
  b.next_states = Tensor(batch_size, demo.state_dim());
  b.mask = Tensor(batch_size, 1);
  b.source.assign(batch_size, SampleSource::kExpert);
  for (std::size_t i = 0; i < batch_size; ++i) {
    if (alpha > 0.0 && rng.bernoulli(alpha)) {
      DemoBuffer::fill_row(b, i, online->transition(rng.index(online->size())),
                           SampleSource::kOnline);
    } else {
      DemoBuffer::fill_row(b, i, demo.transition(rng.index(demo.size())),
                           SampleSource::kExpert);
    }
  }
  return b;
}

/// Deterministic random subsample of whole trajectories (partial
/// Fisher-Yates over indices).
inline std::vector<Trajectory> subsample_trajectories(const std::vector<Trajectory>& all,
                                                      std::size_t n, std::uint64_t seed) {
  if (n == 0) throw contract_error("subsample_trajectories: n must be >= 1");
  if (n >= all.size()) return all;
  std::vector<std::size_t> idx(all.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  Rng rng(Rng::derive_seed(seed, 0xD5));
  for (std::size_t i = 0; i < n; ++i)
    std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
  std::vector<Trajectory> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(all[idx[i]]);
  return out;
}

}  // namespace softdice
