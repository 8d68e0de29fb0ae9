#include "lwf/data/tasks.hpp"

#include <algorithm>
#include <numeric>

namespace lwf::data {

void Split::append(const Split& other) {
  if (!source) source = other.source;
  require(source == other.source, ErrorKind::data, "cannot merge splits over different datasets");
  indices.insert(indices.end(), other.indices.begin(), other.indices.end());
  labels.insert(labels.end(), other.labels.begin(), other.labels.end());
  heads.insert(heads.end(), other.heads.begin(), other.heads.end());
}

namespace {

std::vector<std::vector<std::size_t>> by_class(const Dataset& ds) {
  std::vector<std::vector<std::size_t>> out(ds.num_classes);
  for (std::size_t i = 0; i < ds.size(); ++i) out[ds.labels[i]].push_back(i);
  return out;
}

}  // namespace

TaskSequence split_tasks(std::shared_ptr<const Dataset> train, std::shared_ptr<const Dataset> test,
                         std::size_t n_tasks, std::uint64_t seed, std::optional<std::size_t> classes_per_task) {
  require(train != nullptr, ErrorKind::data, "split_tasks needs a training dataset");
  require(n_tasks >= 1, ErrorKind::config, "n_tasks must be >= 1");
  train->validate();
  const std::size_t classes = train->num_classes;
  if (test) {
    require(test->num_classes <= classes, ErrorKind::data, "test set has more classes than the training set");
    require(test->image_shape() == train->image_shape(), ErrorKind::data, "train and test image shapes differ");
  }
  std::size_t per_task;
  if (classes_per_task) {
    per_task = *classes_per_task;
    require(per_task >= 1 && per_task * n_tasks <= classes, ErrorKind::config,
            std::to_string(n_tasks) + " tasks of " + std::to_string(per_task) + " classes exceed " +
                std::to_string(classes) + " classes");
  } else {
    require(classes % n_tasks == 0, ErrorKind::config,
            std::to_string(classes) + " classes cannot be divided into " + std::to_string(n_tasks) + " tasks");
    per_task = classes / n_tasks;
  }

  Prng rng(seed);
  TaskSequence seq;
  seq.class_order.resize(classes);
  std::iota(seq.class_order.begin(), seq.class_order.end(), 0);
  Prng order_rng = rng.fork(0);
  order_rng.shuffle(std::span<std::size_t>(seq.class_order));

  const auto train_by_class = by_class(*train);
  std::vector<std::vector<std::size_t>> test_by_class;
  if (test) test_by_class = by_class(*test);

  for (std::size_t t = 0; t < n_tasks; ++t) {
    Task task;
    task.id = t;
    task.classes.assign(seq.class_order.begin() + static_cast<std::ptrdiff_t>(t * per_task),
                        seq.class_order.begin() + static_cast<std::ptrdiff_t>((t + 1) * per_task));
    std::vector<std::pair<std::size_t, std::size_t>> pool;  // (dataset index, local label)
    for (std::size_t local = 0; local < per_task; ++local)
      for (auto i : train_by_class[task.classes[local]]) pool.emplace_back(i, local);
    Prng task_rng = rng.fork(1 + t);
    task_rng.shuffle(std::span<std::pair<std::size_t, std::size_t>>(pool));
    const std::size_t n_val = pool.size() / 10;
    task.train.source = train;
    task.val.source = train;
    for (std::size_t k = 0; k < pool.size(); ++k) {
      Split& s = k < n_val ? task.val : task.train;
      s.indices.push_back(pool[k].first);
      s.labels.push_back(pool[k].second);
      s.heads.push_back(t);
    }
    require(!task.train.empty(), ErrorKind::data, "task " + std::to_string(t) + " has no training samples");
    if (test) {
      task.test.source = test;
      std::vector<std::pair<std::size_t, std::size_t>> tpool;
      for (std::size_t local = 0; local < per_task; ++local)
        if (task.classes[local] < test_by_class.size())
          for (auto i : test_by_class[task.classes[local]]) tpool.emplace_back(i, local);
      std::sort(tpool.begin(), tpool.end());
      for (auto [i, local] : tpool) {
        task.test.indices.push_back(i);
        task.test.labels.push_back(local);
        task.test.heads.push_back(t);
      }
    }
    seq.tasks.push_back(std::move(task));
  }
  return seq;
}

template <typename T>
Batch<T> gather(const Split& split, const std::vector<std::size_t>& positions, const AugPolicy* policy,
                const Prng* aug_rng, std::uint64_t key_base) {
  require(split.source != nullptr, ErrorKind::data, "split has no source dataset");
  const Dataset& ds = *split.source;
  const Shape img = ds.image_shape();
  const std::size_t dim = ds.image_size();
  Batch<T> b;
  b.x = Tensor<T>({positions.size(), img[0], img[1], img[2]});
  const bool aug = policy != nullptr && policy->enabled && aug_rng != nullptr;
  std::vector<float> scratch(aug ? dim : 0);
  for (std::size_t k = 0; k < positions.size(); ++k) {
    const std::size_t pos = positions[k];
    require(pos < split.size(), ErrorKind::data, "batch position out of range");
    const float* src = ds.image(split.indices[pos]);
    if (aug) {
      Prng r = aug_rng->fork(key_base + pos);
      apply_aug(src, scratch.data(), img[1], img[2], sample_aug_params(*policy, r));
      src = scratch.data();
    }
    T* dst = b.x.raw() + k * dim;
    for (std::size_t i = 0; i < dim; ++i) dst[i] = static_cast<T>(src[i]);
    b.labels.push_back(split.labels[pos]);
    b.heads.push_back(split.heads[pos]);
    b.positions.push_back(pos);
  }
  return b;
}

template <typename T>
BatchStream<T>::BatchStream(const Split& split, std::size_t batch_size, const Prng& rng, std::uint64_t epoch,
                            const AugPolicy* policy)
    : split_(split),
      batch_size_(batch_size),
      policy_(policy),
      aug_rng_(rng.fork(2)),
      key_base_(epoch * split.size()) {
  require(batch_size >= 1, ErrorKind::config, "batch size must be >= 1");
  require(!split.empty(), ErrorKind::data, "cannot batch an empty split");
  order_.resize(split.size());
  std::iota(order_.begin(), order_.end(), 0);
  Prng shuffle_rng = rng.fork(1).fork(epoch);
  shuffle_rng.shuffle(std::span<std::size_t>(order_));
}

template <typename T>
bool BatchStream<T>::next(Batch<T>& out) {
  if (cursor_ >= order_.size()) return false;
  const std::size_t end = std::min(order_.size(), cursor_ + batch_size_);
  std::vector<std::size_t> positions(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                     order_.begin() + static_cast<std::ptrdiff_t>(end));
  cursor_ = end;
  out = gather<T>(split_, positions, policy_, &aug_rng_, key_base_);
  return true;
}

std::vector<std::vector<std::size_t>> sequential_batches(std::size_t n, std::size_t batch_size) {
  require(batch_size >= 1, ErrorKind::config, "batch size must be >= 1");
  std::vector<std::vector<std::size_t>> out;
  for (std::size_t s = 0; s < n; s += batch_size) {
    std::vector<std::size_t> b(std::min(batch_size, n - s));
    std::iota(b.begin(), b.end(), s);
    out.push_back(std::move(b));
  }
  return out;
}

#define LWF_INSTANTIATE_BATCH(T)                                                                              \
  template Batch<T> gather<T>(const Split&, const std::vector<std::size_t>&, const AugPolicy*, const Prng*, \
                              std::uint64_t);                                                              \
  template class BatchStream<T>;

LWF_INSTANTIATE_BATCH(float)
LWF_INSTANTIATE_BATCH(double)

#undef LWF_INSTANTIATE_BATCH

}  // namespace lwf::data
