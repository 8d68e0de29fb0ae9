#include "lwf/strategies/distill.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "lwf/nn/loss.hpp"

namespace lwf::strategies {

std::vector<double> temperature_scale(std::span<const double> p, double theta) {
  require(theta > 0.0, ErrorKind::argument, "temperature must be positive");
  require(!p.empty(), ErrorKind::shape, "temperature_scale of an empty vector");
  std::vector<double> out(p.size());
  double sum = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    out[k] = std::pow(std::max(p[k], nn::kProbEps), 1.0 / theta);
    sum += out[k];
  }
  for (auto& v : out) v /= sum;
  return out;
}

double distill_loss(std::span<const double> student, std::span<const double> teacher, double theta) {
  require(student.size() == teacher.size(), ErrorKind::shape,
          "distill_loss: student has " + std::to_string(student.size()) + " entries, teacher " +
              std::to_string(teacher.size()));
  const auto s = temperature_scale(student, theta);
  const auto t = temperature_scale(teacher, theta);
  double loss = 0.0;
  for (std::size_t k = 0; k < s.size(); ++k) loss -= t[k] * std::log(std::max(s[k], nn::kProbEps));
  return loss;
}

template <typename T>
Tensor<T> scaled_softmax(const Tensor<T>& logits, double theta) {
  require(theta > 0.0, ErrorKind::argument, "temperature must be positive");
  Tensor<T> z = logits;
  if (theta != 1.0)
    for (auto& v : z.data()) v = static_cast<T>(v / theta);
  return nn::softmax(z);
}

template <typename T>
double distill_logits(const Tensor<T>& student, const Tensor<T>& teacher, double theta, double denom,
                      Tensor<T>& dstudent) {
  require(student.shape() == teacher.shape(), ErrorKind::shape,
          "student logits " + shape_string(student.shape()) + " vs teacher " + shape_string(teacher.shape()));
  const Tensor<T> p = scaled_softmax(student, theta);
  const Tensor<T> q = scaled_softmax(teacher, theta);
  dstudent = Tensor<T>(student.shape());
  double loss = 0.0;
  const double scale = 1.0 / (theta * denom);
  for (std::size_t i = 0; i < p.size(); ++i) {
    loss -= static_cast<double>(q[i]) * std::log(std::max(static_cast<double>(p[i]), nn::kProbEps));
    dstudent[i] = static_cast<T>((p[i] - q[i]) * scale);
  }
  return loss / denom;
}

namespace {

template <typename T>
Tensor<T> take_rows(const Tensor<T>& x, const std::vector<std::size_t>& rows) {
  const std::size_t d = x.size() / x.dim(0);
  Shape s = x.shape();
  s[0] = rows.size();
  Tensor<T> out(s);
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy_n(x.raw() + rows[r] * d, d, out.raw() + r * d);
  return out;
}

template <typename T>
void put_rows(Tensor<T>& dst, const Tensor<T>& src, const std::vector<std::size_t>& rows) {
  const std::size_t d = dst.size() / dst.dim(0);
  for (std::size_t r = 0; r < rows.size(); ++r) std::copy_n(src.raw() + r * d, d, dst.raw() + rows[r] * d);
}

}  // namespace

template <typename T>
Tensor<T> grouped_ce(const nn::MultiHeadNetwork<T>& net, const Tensor<T>& features, const data::Batch<T>& batch,
                     nn::GradStore<T>& grads, double& loss) {
  require(features.dim(0) == batch.size(), ErrorKind::shape, "feature rows do not match the batch");
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < batch.size(); ++i) groups[batch.heads[i]].push_back(i);
  const auto denom = static_cast<double>(batch.size());
  Tensor<T> dfeatures(features.shape());
  loss = 0.0;
  for (const auto& [head, rows] : groups) {
    const Tensor<T> f = take_rows(features, rows);
    std::vector<std::size_t> labels;
    for (auto r : rows) labels.push_back(batch.labels[r]);
    const auto lg = nn::softmax_cross_entropy(net.head_logits(head, f), labels, denom);
    loss += lg.loss;
    put_rows(dfeatures, net.head_backward(head, f, lg.dlogits, grads), rows);
  }
  return dfeatures;
}

template <typename T>
BatchLoss<T> ce_batch_loss(nn::MultiHeadNetwork<T>& net, const data::Batch<T>& batch) {
  BatchLoss<T> r;
  r.grads = net.zero_grads();
  nn::BackboneCache<T> cache;
  const Tensor<T> f = net.features(batch.x, nn::Mode::train, &cache);
  const Tensor<T> df = grouped_ce(net, f, batch, r.grads, r.ce);
  net.backbone_backward(cache, df, r.grads);
  r.loss = r.ce;
  return r;
}

template <typename T>
BatchLoss<T> lwf_batch_loss(nn::MultiHeadNetwork<T>& net, const nn::FrozenNetwork<T>& teacher,
                            const data::Batch<T>& batch, std::size_t task, double theta, double weight) {
  require(teacher.num_heads() >= task, ErrorKind::state,
          "teacher has " + std::to_string(teacher.num_heads()) + " heads, task " + std::to_string(task + 1) +
              " needs " + std::to_string(task));
  for (auto h : batch.heads)
    require(h == task, ErrorKind::state, "LwF batch holds a sample of another task");
  BatchLoss<T> r;
  r.grads = net.zero_grads();
  nn::BackboneCache<T> cache;
  const Tensor<T> f = net.features(batch.x, nn::Mode::train, &cache);
  Tensor<T> df = grouped_ce(net, f, batch, r.grads, r.ce);
  r.loss = r.ce;
  if (task > 0) {
    const Tensor<T> tf = teacher.features(batch.x);
    const auto denom = static_cast<double>(batch.size());
    for (std::size_t i = 0; i < task; ++i) {
      Tensor<T> dz;
      const double d = distill_logits(net.head_logits(i, f), teacher.head_logits(i, tf), theta, denom, dz);
      if (weight != 1.0)
        for (auto& v : dz.data()) v = static_cast<T>(v * weight);
      r.loss += weight * d;
      df += net.head_backward(i, f, dz, r.grads);
    }
  }
  net.backbone_backward(cache, df, r.grads);
  return r;
}

#define LWF_INSTANTIATE_DISTILL(T)                                                                          \
  template Tensor<T> scaled_softmax<T>(const Tensor<T>&, double);                                           \
  template double distill_logits<T>(const Tensor<T>&, const Tensor<T>&, double, double, Tensor<T>&);        \
  template Tensor<T> grouped_ce<T>(const nn::MultiHeadNetwork<T>&, const Tensor<T>&, const data::Batch<T>&, \
                                   nn::GradStore<T>&, double&);                                             \
  template BatchLoss<T> ce_batch_loss<T>(nn::MultiHeadNetwork<T>&, const data::Batch<T>&);                  \
  template BatchLoss<T> lwf_batch_loss<T>(nn::MultiHeadNetwork<T>&, const nn::FrozenNetwork<T>&,            \
                                          const data::Batch<T>&, std::size_t, double, double);

LWF_INSTANTIATE_DISTILL(float)
LWF_INSTANTIATE_DISTILL(double)

#undef LWF_INSTANTIATE_DISTILL

}  // namespace lwf::strategies
