#pragma once

#include <Eigen/Dense>

#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ekfslam {

enum class BlockRole { Robot, Sensor, Landmark };

const char* to_string(BlockRole role);

struct BlockHandle {
  int id{-1};
  bool valid() const { return id >= 0; }
  friend auto operator<=>(const BlockHandle&, const BlockHandle&) = default;
};

struct BlockSlot {
  BlockRole role{BlockRole::Landmark};
  int offset{0};
  int length{0};
  bool allocated{false};
};

class MapFullError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidHandleError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class NotPositiveDefiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class CorrectionStatus { Applied, SingularInnovation };

/// One term J * x_block of a linear combination of existing blocks.
struct LinearSource {
  BlockHandle block;
  Eigen::MatrixXd jacobian;
};

class StochasticMap;

/// The relevant part of a map state after a single-measurement correction,
/// evaluated lazily without touching the map: P' = P - (PH^T) S^-1 (PH^T)^T.
class TentativeCorrection {
 public:
  Eigen::VectorXd mean(const std::vector<int>& indices) const;
  Eigen::MatrixXd covariance(const std::vector<int>& indices) const;
  bool valid() const { return valid_; }

 private:
  friend class StochasticMap;
  const StochasticMap* map_{nullptr};
  Eigen::VectorXd x_;
  Eigen::MatrixXd pht_;    // capacity x m, zero outside active indices
  Eigen::MatrixXd s_inv_;  // m x m
  bool valid_{false};
};

/// Joint Gaussian over robot, sensor and landmark blocks stored in a fixed
/// capacity vector/matrix pair. Every operation works through the index
/// list of allocated blocks so free storage is never read.
class StochasticMap {
 public:
  explicit StochasticMap(int capacity);

  int capacity() const { return capacity_; }
  int free_capacity() const;
  int allocated_size() const { return static_cast<int>(active_.size()); }
  /// Largest contiguous free range.
  int largest_free_range() const;

  BlockHandle allocate_block(BlockRole role, int length);
  void remove_block(BlockHandle h);

  bool is_allocated(BlockHandle h) const;
  const BlockSlot& slot(BlockHandle h) const;
  std::vector<BlockHandle> blocks() const;
  std::vector<int> block_indices(BlockHandle h) const;
  std::vector<int> indices(std::span<const BlockHandle> hs) const;
  const std::vector<int>& active_indices() const { return active_; }

  Eigen::VectorXd mean(BlockHandle h) const;
  void set_mean(BlockHandle h, const Eigen::VectorXd& v);
  Eigen::MatrixXd covariance(BlockHandle a, BlockHandle b) const;
  Eigen::MatrixXd covariance(BlockHandle h) const { return covariance(h, h); }
  /// Overwrites the diagonal block only; cross-covariances are untouched.
  void set_covariance(BlockHandle h, const Eigen::MatrixXd& c);

  const Eigen::VectorXd& state() const { return x_; }
  const Eigen::MatrixXd& covariance_matrix() const { return p_; }

  /// x_b <- new_mean, P_bb <- F P_bb F^T + Q, P_b* <- F P_b*.
  void predict_block(BlockHandle h, const Eigen::VectorXd& new_mean, const Eigen::MatrixXd& f,
                     const Eigen::MatrixXd& q);

  template <class Transition>
  void predict_block_with(BlockHandle h, Transition&& fn, const Eigen::MatrixXd& f,
                          const Eigen::MatrixXd& q) {
    predict_block(h, fn(mean(h)), f, q);
  }

  /// S = H P H^T + R restricted to the involved blocks.
  Eigen::MatrixXd innovation_covariance(std::span<const BlockHandle> involved,
                                        const Eigen::MatrixXd& h, const Eigen::MatrixXd& r) const;

  /// Standard-form EKF correction over the full state, then re-symmetrization.
  CorrectionStatus correct(std::span<const BlockHandle> involved, const Eigen::MatrixXd& h,
                           const Eigen::VectorXd& y, const Eigen::MatrixXd& s);

  TentativeCorrection tentative_correct(std::span<const BlockHandle> involved,
                                        const Eigen::MatrixXd& h, const Eigen::VectorXd& y,
                                        const Eigen::MatrixXd& s) const;

  /// Fills a freshly allocated block with mean and the covariance of
  /// sum_k J_k x_k + noise, including all cross-covariances.
  void initialize_block(BlockHandle target, const Eigen::VectorXd& mean,
                        std::span<const LinearSource> sources, const Eigen::MatrixXd& extra_cov);

  void symmetrize();
  double min_eigenvalue() const;
  double max_asymmetry() const;

  /// CSV dump: block/mean/cov records. See README for the layout.
  void write_csv(std::ostream& os) const;
  static StochasticMap read_csv(std::istream& is);

 private:
  BlockSlot& checked_slot(BlockHandle h);
  void rebuild_active();

  int capacity_;
  Eigen::VectorXd x_;
  Eigen::MatrixXd p_;
  std::vector<BlockSlot> slots_;
  struct Range {
    int offset;
    int length;
  };
  std::vector<Range> free_;
  std::vector<int> active_;
};

/// d^2 = y^T S^-1 y. Throws NotPositiveDefiniteError when S is not SPD.
double mahalanobis(const Eigen::VectorXd& y, const Eigen::MatrixXd& s);

}  // namespace ekfslam
