#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace dsopt {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Error categories; each maps onto a CLI exit code.
enum class ErrorKind {
    Domain,        ///< argument outside the mathematical domain of an operation
    Size,          ///< inconsistent or too small sizes
    Data,          ///< insufficient or degenerate data
    Criterion,     ///< infinite design criterion (coincident coordinates)
    Conditioning,  ///< numerically singular system
    Config,        ///< bad configuration
    Budget,        ///< evaluation budget exhausted or insufficient
    Selection,     ///< empty influential-subspace selection
    Io             ///< file or process I/O failure
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Conditioning failure carrying the condition estimate of the offending matrix.
class ConditioningError : public Error {
public:
    ConditioningError(const std::string& what, double conditionEstimate)
        : Error(ErrorKind::Conditioning, what), condition_(conditionEstimate) {}
    double conditionEstimate() const noexcept { return condition_; }

private:
    double condition_;
};

inline int exitCode(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::Config:
    case ErrorKind::Io:
        return 2;
    case ErrorKind::Budget:
    case ErrorKind::Selection:
    case ErrorKind::Data:
    case ErrorKind::Size:
    case ErrorKind::Domain:
    case ErrorKind::Criterion:
        return 3;
    case ErrorKind::Conditioning:
        return 4;
    }
    return 1;
}

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

enum class Partition { Training, Validation, Adaptive };

const char* name(Partition p);
Partition partitionFromName(const std::string& s);

/// One evaluated design. `unit` are CDF-normalized coordinates, `physical` the
/// evaluated values; `transformed` is the response after the current output transform.
struct Sample {
    VectorXd unit;
    VectorXd physical;
    double response = 0.0;
    double transformed = 0.0;
    Partition partition = Partition::Training;
    int stage = 0;
};

/// Ordered collection of evaluated designs.
class Dataset {
public:
    Dataset() = default;
    explicit Dataset(std::vector<Sample> samples) : samples_(std::move(samples)) {}

    /// Builds a training dataset from unit coordinates and responses (physical = unit).
    static Dataset fromMatrix(const MatrixXd& unit, const VectorXd& response);

    Index size() const { return static_cast<Index>(samples_.size()); }
    bool empty() const { return samples_.empty(); }
    Index dims() const { return samples_.empty() ? 0 : samples_.front().unit.size(); }

    const Sample& operator[](Index i) const { return samples_[static_cast<std::size_t>(i)]; }
    Sample& operator[](Index i) { return samples_[static_cast<std::size_t>(i)]; }

    void push_back(Sample s) { samples_.push_back(std::move(s)); }
    const std::vector<Sample>& samples() const { return samples_; }
    std::vector<Sample>& samples() { return samples_; }

    MatrixXd unitMatrix() const;
    VectorXd responses() const;
    VectorXd transformedResponses() const;

    /// Subset of samples with the given partition labels.
    Dataset filter(std::initializer_list<Partition> keep) const;

private:
    std::vector<Sample> samples_;
};

}  // namespace dsopt
