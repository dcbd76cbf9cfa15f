#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "xvseg/tensor.hpp"

namespace xvseg {

struct FdReport {
  bool ok = true;
  std::string detail;  // first failure, empty when ok
  int checked = 0;
};

// Central-difference gradient check. `make_loss` must rebuild the scalar loss
// from the current contents of `inputs` every time it is called. Analytic
// gradients come from one taped backward pass; numeric ones from f(x±h)
// evaluated with no active tape. Pass when
//   |analytic - numeric| <= tol * max(1, |analytic|, |numeric|).
inline FdReport fd_check(const std::string& name, std::vector<Tensor> inputs,
                         const std::function<Tensor()>& make_loss,
                         double h = 1e-5, double tol = 1e-4) {
  FdReport report;
  for (auto& t : inputs) {
    t.set_requires_grad(true);
    t.zero_grad();  // discard residue from any earlier backward pass
  }

  std::vector<std::vector<double>> analytic;
  {
    Tape tape;
    Tape::Scope scope(tape);
    Tensor loss = make_loss();
    tape.backward(loss);
    for (auto& t : inputs) {
      analytic.push_back(t.has_grad() ? t.grad()
                                      : std::vector<double>(t.size(), 0.0));
    }
  }

  for (std::size_t ti = 0; ti < inputs.size(); ++ti) {
    Tensor& t = inputs[ti];
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double saved = t.data()[i];
      t.data()[i] = saved + h;
      const double up = make_loss().item();
      t.data()[i] = saved - h;
      const double down = make_loss().item();
      t.data()[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[ti][i];
      ++report.checked;
      const double bound =
          tol * std::max({1.0, std::fabs(a), std::fabs(numeric)});
      if (!(std::fabs(a - numeric) <= bound)) {
        std::ostringstream os;
        os << name << ": input " << ti << " element " << i << ": analytic "
           << a << " vs numeric " << numeric << " (|diff| "
           << std::fabs(a - numeric) << " > " << bound << ")";
        report.ok = false;
        report.detail = os.str();
        return report;
      }
    }
  }
  return report;
}

}  // namespace xvseg
