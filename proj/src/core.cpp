#include "dsopt/core.hpp"

#include <algorithm>

namespace dsopt {

const char* name(Partition p) {
    switch (p) {
    case Partition::Training:
        return "training";
    case Partition::Validation:
        return "validation";
    case Partition::Adaptive:
        return "adaptive";
    }
    return "training";
}

Partition partitionFromName(const std::string& s) {
    if (s == "training") return Partition::Training;
    if (s == "validation") return Partition::Validation;
    if (s == "adaptive") return Partition::Adaptive;
    fail(ErrorKind::Config, "unknown partition label '" + s + "'");
}

Dataset Dataset::fromMatrix(const MatrixXd& unit, const VectorXd& response) {
    if (unit.rows() != response.size()) fail(ErrorKind::Size, "row count does not match response count");
    Dataset d;
    for (Index i = 0; i < unit.rows(); ++i) {
        Sample s;
        s.unit = unit.row(i).transpose();
        s.physical = s.unit;
        s.response = response(i);
        s.transformed = response(i);
        d.push_back(std::move(s));
    }
    return d;
}

MatrixXd Dataset::unitMatrix() const {
    MatrixXd X(size(), dims());
    for (Index i = 0; i < size(); ++i) X.row(i) = (*this)[i].unit.transpose();
    return X;
}

VectorXd Dataset::responses() const {
    VectorXd y(size());
    for (Index i = 0; i < size(); ++i) y(i) = (*this)[i].response;
    return y;
}

VectorXd Dataset::transformedResponses() const {
    VectorXd y(size());
    for (Index i = 0; i < size(); ++i) y(i) = (*this)[i].transformed;
    return y;
}

Dataset Dataset::filter(std::initializer_list<Partition> keep) const {
    Dataset out;
    for (const auto& s : samples_)
        if (std::find(keep.begin(), keep.end(), s.partition) != keep.end()) out.push_back(s);
    return out;
}

}  // namespace dsopt
