#ifndef OPE_LAB_SUMMATION_HPP
#define OPE_LAB_SUMMATION_HPP

#include <cmath>
#include <cstddef>

namespace ope_lab {

// Neumaier's variant of Kahan summation. Keeps estimator means stable when
// importance weights span several orders of magnitude.
class CompensatedSum {
 public:
  void add(double value) {
    const double t = sum_ + value;
    if (std::abs(sum_) >= std::abs(value)) {
      compensation_ += (sum_ - t) + value;
    } else {
      compensation_ += (value - t) + sum_;
    }
    sum_ = t;
    ++count_;
  }

  CompensatedSum& operator+=(double value) {
    add(value);
    return *this;
  }

  double value() const { return sum_ + compensation_; }
  std::size_t count() const { return count_; }
  double mean() const { return count_ == 0 ? 0.0 : value() / static_cast<double>(count_); }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
  std::size_t count_ = 0;
};

template <class Range>
double compensated_mean(const Range& values) {
  CompensatedSum acc;
  for (double v : values) acc.add(v);
  return acc.mean();
}

}  // namespace ope_lab

#endif  // OPE_LAB_SUMMATION_HPP
