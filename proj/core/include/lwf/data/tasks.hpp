#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <vector>

#include "lwf/data/augment.hpp"
#include "lwf/data/dataset.hpp"

namespace lwf::data {

/// A view of samples from a dataset with task-local labels and the head each
/// sample belongs to.
struct Split {
  std::shared_ptr<const Dataset> source;
  std::vector<std::size_t> indices;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> heads;

  std::size_t size() const { return indices.size(); }
  bool empty() const { return indices.empty(); }
  void append(const Split& other);
};

struct Task {
  std::size_t id = 0;
  std::vector<std::size_t> classes;  // global ids, local label = position
  Split train;
  Split val;
  Split test;
};

struct TaskSequence {
  std::vector<std::size_t> class_order;
  std::vector<Task> tasks;
};

/// Shuffles the class order with the seed and cuts consecutive groups into tasks.
/// Each task's training samples are shuffled and the first 10% (rounded down)
/// become the validation split. Without classes_per_task the class count must
/// divide evenly; with it, only the first n_tasks * classes_per_task classes of
/// the shuffled order are used.
TaskSequence split_tasks(std::shared_ptr<const Dataset> train, std::shared_ptr<const Dataset> test,
                         std::size_t n_tasks, std::uint64_t seed,
                         std::optional<std::size_t> classes_per_task = std::nullopt);

template <typename T>
struct Batch {
  Tensor<T> x;
  std::vector<std::size_t> labels;
  std::vector<std::size_t> heads;
  std::vector<std::size_t> positions;  // indices into the split

  std::size_t size() const { return labels.size(); }
};

/// Gathers the given split positions into a batch, optionally augmenting sample
/// i with aug_rng.fork(key_base + position).
template <typename T>
Batch<T> gather(const Split& split, const std::vector<std::size_t>& positions, const AugPolicy* policy = nullptr,
                const Prng* aug_rng = nullptr, std::uint64_t key_base = 0);

/// One epoch of minibatches. The order is shuffled with rng.fork(1).fork(epoch);
/// sample at split position i is augmented with rng.fork(2).fork(epoch * N + i).
/// The last short batch is kept.
template <typename T>
class BatchStream {
 public:
  BatchStream(const Split& split, std::size_t batch_size, const Prng& rng, std::uint64_t epoch,
              const AugPolicy* policy = nullptr);

  std::size_t num_batches() const { return (order_.size() + batch_size_ - 1) / batch_size_; }
  bool next(Batch<T>& out);

 private:
  const Split& split_;
  std::size_t batch_size_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  const AugPolicy* policy_;
  Prng aug_rng_;
  std::uint64_t key_base_;
};

/// Positions 0..n-1 cut into consecutive groups of batch_size.
std::vector<std::vector<std::size_t>> sequential_batches(std::size_t n, std::size_t batch_size);

}  // namespace lwf::data
