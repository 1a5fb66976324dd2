#include "unideal/clkd.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace unideal {

namespace {

constexpr double kNormFloor = 1e-12;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

std::vector<double> mutual_eval_scores(const Matrix& teacher_logits,
                                       const Matrix& student_logits,
                                       const SimilarityMetric& metric) {
  if (!teacher_logits.same_shape(student_logits)) {
    throw ShapeError("mutual_eval_scores: teacher/student logit shapes differ");
  }
  if (teacher_logits.rows() == 0) {
    throw InvalidInputError("mutual_eval_scores: empty batch");
  }
  if (metric.epsilon <= 0.0) {
    throw InvalidInputError("mutual_eval_scores: epsilon must be positive");
  }
  std::vector<double> scores(teacher_logits.rows());
  for (std::size_t i = 0; i < teacher_logits.rows(); ++i) {
    const auto t = teacher_logits.row(i);
    const auto s = student_logits.row(i);
    switch (metric.kind) {
      case MetricKind::kCosine: {
        const double nt = std::sqrt(dot(t, t));
        const double ns = std::sqrt(dot(s, s));
        scores[i] = (nt < kNormFloor || ns < kNormFloor) ? 0.0 : dot(t, s) / (nt * ns);
        break;
      }
      case MetricKind::kInvL1: {
        double l1 = 0.0;
        for (std::size_t c = 0; c < t.size(); ++c) l1 += std::abs(t[c] - s[c]);
        scores[i] = 1.0 / (l1 + metric.epsilon);
        break;
      }
      case MetricKind::kInvL2: {
        double l2 = 0.0;
        for (std::size_t c = 0; c < t.size(); ++c) l2 += (t[c] - s[c]) * (t[c] - s[c]);
        scores[i] = 1.0 / (std::sqrt(l2) + metric.epsilon);
        break;
      }
    }
  }
  return scores;
}

int kept_count(int step, const CurriculumSchedule& schedule, int batch_size) {
  if (schedule.total_steps < 1) {
    throw InvalidInputError("kept_count: total_steps must be >= 1");
  }
  if (step < 0 || step >= schedule.total_steps) {
    throw InvalidInputError("kept_count: step " + std::to_string(step) +
                            " outside [0, " + std::to_string(schedule.total_steps) + ")");
  }
  if (batch_size < 1) {
    throw InvalidInputError("kept_count: batch size must be >= 1");
  }
  if (schedule.mode == ScheduleMode::kPaperLiteral) {
    const double t = schedule.total_steps == 1
                         ? 1.0
                         : static_cast<double>(step) / (schedule.total_steps - 1);
    // s_T = Sort(s)[Round(p * B)] with p = (1 - t) / B, zero-based index.
    const int index = static_cast<int>(std::llround(1.0 - t));
    return std::clamp(index + 1, 1, batch_size);
  }
  if (schedule.total_steps == 1) {
    return batch_size;
  }
  const double kept = 1.0 + (batch_size - 1.0) * static_cast<double>(step) /
                                (schedule.total_steps - 1.0);
  return std::clamp(static_cast<int>(std::llround(kept)), 1, batch_size);
}

double adjustable_threshold(std::span<const double> scores, int kept) {
  if (scores.empty()) {
    throw InvalidInputError("adjustable_threshold: empty score vector");
  }
  if (kept < 1 || kept > static_cast<int>(scores.size())) {
    throw InvalidInputError("adjustable_threshold: kept must lie in [1, B]");
  }
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end(), std::greater<>());
  return sorted[static_cast<std::size_t>(kept - 1)];
}

MaskedBatchLoss clkd_loss(const Matrix& teacher_logits, const Matrix& student_logits,
                          double threshold, std::span<const double> scores) {
  if (!teacher_logits.same_shape(student_logits)) {
    throw ShapeError("clkd_loss: teacher/student logit shapes differ");
  }
  if (scores.size() != teacher_logits.rows()) {
    throw ShapeError("clkd_loss: score count does not match batch size");
  }
  MaskedBatchLoss out;
  out.kept_mask.assign(teacher_logits.rows(), 0);
  out.student_logit_grad = Matrix(student_logits.rows(), student_logits.cols());
  for (std::size_t i = 0; i < teacher_logits.rows(); ++i) {
    if (!(scores[i] >= threshold)) continue;
    out.kept_mask[i] = 1;
    ++out.kept_count;
    const auto p = softmax(teacher_logits.row(i));
    const auto q = softmax(student_logits.row(i));
    out.loss += kl_divergence(p, q);
    auto grad = out.student_logit_grad.row(i);
    for (std::size_t c = 0; c < q.size(); ++c) {
      grad[c] = q[c] - p[c];
    }
  }
  return out;
}

CombinedObjective combined_objective(const CrossEntropyResult& ce,
                                     const MaskedBatchLoss& kd, double alpha) {
  if (alpha < 0.0) {
    throw ConfigError("alpha must be >= 0");
  }
  if (alpha == 0.0) {
    return {ce.loss, ce.logit_grad};
  }
  if (!ce.logit_grad.same_shape(kd.student_logit_grad)) {
    throw ShapeError("combined_objective: gradient shapes differ");
  }
  CombinedObjective out;
  out.loss = ce.loss + 0.5 * alpha * kd.loss;
  out.student_logit_grad = ce.logit_grad;
  const double scale = 0.5 * alpha;
  for (std::size_t i = 0; i < out.student_logit_grad.size(); ++i) {
    out.student_logit_grad.data()[i] += scale * kd.student_logit_grad.data()[i];
  }
  return out;
}

}  // namespace unideal
