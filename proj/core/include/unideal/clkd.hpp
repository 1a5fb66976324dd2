#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "unideal/matrix.hpp"
#include "unideal/nn.hpp"

namespace unideal {

enum class MetricKind { kCosine, kInvL1, kInvL2 };

// Per-sample teacher-student similarity. Cosine of the raw logit rows, or the
// reciprocal of the L1/L2 norm of their difference (offset by epsilon).
struct SimilarityMetric {
  MetricKind kind = MetricKind::kCosine;
  double epsilon = 1e-8;
};

// Higher score = teacher and student agree more = easier sample to distill.
std::vector<double> mutual_eval_scores(const Matrix& teacher_logits,
                                       const Matrix& student_logits,
                                       const SimilarityMetric& metric);

enum class ScheduleMode {
  // Kept-sample count grows 1 -> B linearly over total_steps: one easiest
  // sample at step 0, the whole batch at the last step.
  kLinearKept,
  // Threshold index Round(p * B) with p falling 1/B -> 0 linearly, verbatim.
  // Degenerate (kept stays at 2 then 1); provided for comparison runs.
  kPaperLiteral,
};

// The schedule clock advances once per local epoch; total_steps is
// local_epochs x rounds unless the per-round reset flag is on.
struct CurriculumSchedule {
  int total_steps = 1;
  ScheduleMode mode = ScheduleMode::kLinearKept;
};

// Number of samples to keep at `step` in [0, total_steps). Non-decreasing in
// step for kLinearKept, always in [1, batch_size].
int kept_count(int step, const CurriculumSchedule& schedule, int batch_size);

// The kept-th largest score. Samples with score >= threshold are retained:
// at least `kept` of them, more only under ties.
double adjustable_threshold(std::span<const double> scores, int kept);

struct MaskedBatchLoss {
  double loss = 0.0;
  std::vector<std::uint8_t> kept_mask;
  int kept_count = 0;
  Matrix student_logit_grad;  // rows of masked-out samples are all-zero
};

// Sum over retained samples of KL(softmax(teacher) || softmax(student)).
// The teacher distribution is a constant during backpropagation, so the
// gradient wrt the student logits is softmax(student) - softmax(teacher) on
// retained rows and zero elsewhere.
MaskedBatchLoss clkd_loss(const Matrix& teacher_logits, const Matrix& student_logits,
                          double threshold, std::span<const double> scores);

struct CombinedObjective {
  double loss = 0.0;
  Matrix student_logit_grad;
};

// total = L_CE + (alpha / 2) * L_KD, gradients combined the same way. With
// alpha = 0 this is exactly plain cross-entropy training.
CombinedObjective combined_objective(const CrossEntropyResult& ce,
                                     const MaskedBatchLoss& kd, double alpha);

}  // namespace unideal
