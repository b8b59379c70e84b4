#include "ekfslam/ekf_map.hpp"

#include <algorithm>
#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>

namespace ekfslam {

const char* to_string(BlockRole role) {
  switch (role) {
    case BlockRole::Robot: return "robot";
    case BlockRole::Sensor: return "sensor";
    case BlockRole::Landmark: return "landmark";
  }
  return "?";
}

Eigen::VectorXd TentativeCorrection::mean(const std::vector<int>& indices) const {
  return x_(indices);
}

Eigen::MatrixXd TentativeCorrection::covariance(const std::vector<int>& indices) const {
  const Eigen::MatrixXd a = pht_(indices, Eigen::all);
  Eigen::MatrixXd c = map_->covariance_matrix()(indices, indices);
  c.noalias() -= a * s_inv_ * a.transpose();
  return c;
}

StochasticMap::StochasticMap(int capacity)
    : capacity_(capacity),
      x_(Eigen::VectorXd::Zero(capacity)),
      p_(Eigen::MatrixXd::Zero(capacity, capacity)) {
  if (capacity <= 0) throw std::invalid_argument("map capacity must be positive");
  free_.push_back({0, capacity});
}

int StochasticMap::free_capacity() const { return capacity_ - allocated_size(); }

int StochasticMap::largest_free_range() const {
  int best = 0;
  for (const auto& r : free_) best = std::max(best, r.length);
  return best;
}

BlockHandle StochasticMap::allocate_block(BlockRole role, int length) {
  if (length <= 0) throw std::invalid_argument("block length must be positive");
  auto it = std::find_if(free_.begin(), free_.end(), [&](const Range& r) { return r.length >= length; });
  if (it == free_.end()) throw MapFullError("stochastic map full");
  const int offset = it->offset;
  it->offset += length;
  it->length -= length;
  if (it->length == 0) free_.erase(it);

  x_.segment(offset, length).setZero();
  p_.middleRows(offset, length).setZero();
  p_.middleCols(offset, length).setZero();

  // Ids are never reused, so a stale handle can never alias a newer block.
  slots_.push_back({role, offset, length, true});
  const BlockHandle h{static_cast<int>(slots_.size()) - 1};
  rebuild_active();
  return h;
}

void StochasticMap::remove_block(BlockHandle h) {
  BlockSlot& s = checked_slot(h);
  x_.segment(s.offset, s.length).setZero();
  p_.middleRows(s.offset, s.length).setZero();
  p_.middleCols(s.offset, s.length).setZero();

  Range r{s.offset, s.length};
  auto pos = std::lower_bound(free_.begin(), free_.end(), r,
                              [](const Range& a, const Range& b) { return a.offset < b.offset; });
  pos = free_.insert(pos, r);
  // merge with neighbours
  if (pos + 1 != free_.end() && pos->offset + pos->length == (pos + 1)->offset) {
    pos->length += (pos + 1)->length;
    free_.erase(pos + 1);
  }
  if (pos != free_.begin() && (pos - 1)->offset + (pos - 1)->length == pos->offset) {
    (pos - 1)->length += pos->length;
    free_.erase(pos);
  }
  s.allocated = false;
  rebuild_active();
}

bool StochasticMap::is_allocated(BlockHandle h) const {
  return h.id >= 0 && h.id < static_cast<int>(slots_.size()) && slots_[h.id].allocated;
}

const BlockSlot& StochasticMap::slot(BlockHandle h) const {
  if (!is_allocated(h)) throw InvalidHandleError("invalid or freed block handle");
  return slots_[h.id];
}

BlockSlot& StochasticMap::checked_slot(BlockHandle h) {
  if (!is_allocated(h)) throw InvalidHandleError("invalid or freed block handle");
  return slots_[h.id];
}

std::vector<BlockHandle> StochasticMap::blocks() const {
  std::vector<BlockHandle> out;
  for (int i = 0; i < static_cast<int>(slots_.size()); ++i)
    if (slots_[i].allocated) out.push_back({i});
  return out;
}

std::vector<int> StochasticMap::block_indices(BlockHandle h) const {
  const BlockSlot& s = slot(h);
  std::vector<int> idx(s.length);
  for (int i = 0; i < s.length; ++i) idx[i] = s.offset + i;
  return idx;
}

std::vector<int> StochasticMap::indices(std::span<const BlockHandle> hs) const {
  std::vector<int> idx;
  for (const auto& h : hs) {
    const BlockSlot& s = slot(h);
    for (int i = 0; i < s.length; ++i) idx.push_back(s.offset + i);
  }
  return idx;
}

void StochasticMap::rebuild_active() {
  active_.clear();
  std::vector<const BlockSlot*> live;
  for (const auto& s : slots_)
    if (s.allocated) live.push_back(&s);
  std::sort(live.begin(), live.end(), [](auto a, auto b) { return a->offset < b->offset; });
  for (const auto* s : live)
    for (int i = 0; i < s->length; ++i) active_.push_back(s->offset + i);
}

Eigen::VectorXd StochasticMap::mean(BlockHandle h) const {
  const BlockSlot& s = slot(h);
  return x_.segment(s.offset, s.length);
}

void StochasticMap::set_mean(BlockHandle h, const Eigen::VectorXd& v) {
  const BlockSlot& s = checked_slot(h);
  if (v.size() != s.length) throw std::invalid_argument("set_mean: dimension mismatch");
  x_.segment(s.offset, s.length) = v;
}

Eigen::MatrixXd StochasticMap::covariance(BlockHandle a, BlockHandle b) const {
  const BlockSlot& sa = slot(a);
  const BlockSlot& sb = slot(b);
  return p_.block(sa.offset, sb.offset, sa.length, sb.length);
}

void StochasticMap::set_covariance(BlockHandle h, const Eigen::MatrixXd& c) {
  const BlockSlot& s = checked_slot(h);
  if (c.rows() != s.length || c.cols() != s.length)
    throw std::invalid_argument("set_covariance: dimension mismatch");
  p_.block(s.offset, s.offset, s.length, s.length) = 0.5 * (c + c.transpose());
}

void StochasticMap::predict_block(BlockHandle h, const Eigen::VectorXd& new_mean,
                                  const Eigen::MatrixXd& f, const Eigen::MatrixXd& q) {
  const BlockSlot& s = checked_slot(h);
  const int n = s.length;
  if (new_mean.size() != n || f.rows() != n || f.cols() != n || q.rows() != n || q.cols() != n)
    throw std::invalid_argument("predict_block: dimension mismatch");

  const auto rows = Eigen::seqN(s.offset, n);
  // F P_b* over every allocated column, the block's own columns included.
  const Eigen::MatrixXd fp = f * p_(rows, active_);
  const int pos = static_cast<int>(std::lower_bound(active_.begin(), active_.end(), s.offset) - active_.begin());
  Eigen::MatrixXd pbb = fp.middleCols(pos, n) * f.transpose() + q;
  pbb = 0.5 * (pbb + pbb.transpose()).eval();

  p_(rows, active_) = fp;
  p_(active_, rows) = fp.transpose();
  p_.block(s.offset, s.offset, n, n) = pbb;
  x_.segment(s.offset, n) = new_mean;
}

Eigen::MatrixXd StochasticMap::innovation_covariance(std::span<const BlockHandle> involved,
                                                     const Eigen::MatrixXd& h,
                                                     const Eigen::MatrixXd& r) const {
  const std::vector<int> idx = indices(involved);
  if (h.cols() != static_cast<int>(idx.size()) || r.rows() != h.rows() || r.cols() != h.rows())
    throw std::invalid_argument("innovation_covariance: dimension mismatch");
  Eigen::MatrixXd s = h * p_(idx, idx) * h.transpose() + r;
  return 0.5 * (s + s.transpose());
}

CorrectionStatus StochasticMap::correct(std::span<const BlockHandle> involved,
                                        const Eigen::MatrixXd& h, const Eigen::VectorXd& y,
                                        const Eigen::MatrixXd& s) {
  const std::vector<int> idx = indices(involved);
  const int m = static_cast<int>(h.rows());
  if (h.cols() != static_cast<int>(idx.size()) || y.size() != m || s.rows() != m || s.cols() != m)
    throw std::invalid_argument("correct: dimension mismatch");

  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success || !s.allFinite()) return CorrectionStatus::SingularInnovation;

  const Eigen::MatrixXd pht = p_(active_, idx) * h.transpose();       // n x m
  const Eigen::MatrixXd k = llt.solve(pht.transpose()).transpose();   // P H^T S^-1

  x_(active_) += k * y;
  Eigen::MatrixXd pa = p_(active_, active_);
  pa.noalias() -= k * pht.transpose();
  p_(active_, active_) = 0.5 * (pa + pa.transpose());
  return CorrectionStatus::Applied;
}

TentativeCorrection StochasticMap::tentative_correct(std::span<const BlockHandle> involved,
                                                     const Eigen::MatrixXd& h,
                                                     const Eigen::VectorXd& y,
                                                     const Eigen::MatrixXd& s) const {
  TentativeCorrection t;
  t.map_ = this;
  const std::vector<int> idx = indices(involved);
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success || !s.allFinite()) return t;
  t.s_inv_ = llt.solve(Eigen::MatrixXd::Identity(s.rows(), s.cols()));
  t.pht_ = Eigen::MatrixXd::Zero(capacity_, h.rows());
  t.pht_(active_, Eigen::all) = p_(active_, idx) * h.transpose();
  t.x_ = x_;
  t.x_(active_) += t.pht_(active_, Eigen::all) * (t.s_inv_ * y);
  t.valid_ = true;
  return t;
}

void StochasticMap::initialize_block(BlockHandle target, const Eigen::VectorXd& mean,
                                     std::span<const LinearSource> sources,
                                     const Eigen::MatrixXd& extra_cov) {
  const BlockSlot& t = checked_slot(target);
  const int n = t.length;
  if (mean.size() != n || extra_cov.rows() != n || extra_cov.cols() != n)
    throw std::invalid_argument("initialize_block: dimension mismatch");

  Eigen::MatrixXd cross = Eigen::MatrixXd::Zero(n, static_cast<Eigen::Index>(active_.size()));
  for (const auto& src : sources) {
    if (src.block == target) throw std::invalid_argument("initialize_block: self reference");
    const BlockSlot& s = slot(src.block);
    if (src.jacobian.rows() != n || src.jacobian.cols() != s.length)
      throw std::invalid_argument("initialize_block: jacobian dimension mismatch");
    cross.noalias() += src.jacobian * p_(Eigen::seqN(s.offset, s.length), active_);
  }
  // Columns of cross that belong to the source blocks give sum_l J_k P_kl.
  Eigen::MatrixXd pnn = extra_cov;
  for (const auto& src : sources) {
    const BlockSlot& s = slot(src.block);
    const int pos = static_cast<int>(std::lower_bound(active_.begin(), active_.end(), s.offset) - active_.begin());
    pnn.noalias() += cross.middleCols(pos, s.length) * src.jacobian.transpose();
  }
  const auto rows = Eigen::seqN(t.offset, n);
  p_(rows, active_) = cross;
  p_(active_, rows) = cross.transpose();
  p_.block(t.offset, t.offset, n, n) = 0.5 * (pnn + pnn.transpose());
  x_.segment(t.offset, n) = mean;
}

void StochasticMap::symmetrize() {
  Eigen::MatrixXd pa = p_(active_, active_);
  p_(active_, active_) = 0.5 * (pa + pa.transpose());
}

double StochasticMap::min_eigenvalue() const {
  if (active_.empty()) return 0.0;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(p_(active_, active_), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double StochasticMap::max_asymmetry() const {
  if (active_.empty()) return 0.0;
  const Eigen::MatrixXd pa = p_(active_, active_);
  return (pa - pa.transpose()).cwiseAbs().maxCoeff();
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
  double v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc()) throw std::runtime_error("map csv: bad number '" + s + "'");
  return v;
}

BlockRole parse_role(const std::string& s) {
  if (s == "robot") return BlockRole::Robot;
  if (s == "sensor") return BlockRole::Sensor;
  if (s == "landmark") return BlockRole::Landmark;
  throw std::runtime_error("map csv: bad role '" + s + "'");
}

}  // namespace

void StochasticMap::write_csv(std::ostream& os) const {
  os << "capacity," << capacity_ << "\n";
  for (int i = 0; i < static_cast<int>(slots_.size()); ++i) {
    const auto& s = slots_[i];
    if (!s.allocated) continue;
    os << "block," << i << ',' << to_string(s.role) << ',' << s.offset << ',' << s.length << "\n";
  }
  for (int i : active_) os << "mean," << i << ',' << fmt_double(x_(i)) << "\n";
  for (std::size_t a = 0; a < active_.size(); ++a)
    for (std::size_t b = a; b < active_.size(); ++b)
      os << "cov," << active_[a] << ',' << active_[b] << ',' << fmt_double(p_(active_[a], active_[b])) << "\n";
}

StochasticMap StochasticMap::read_csv(std::istream& is) {
  std::string line;
  std::vector<std::vector<std::string>> rows;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    rows.push_back(std::move(fields));
  }
  if (rows.empty() || rows[0].size() != 2 || rows[0][0] != "capacity")
    throw std::runtime_error("map csv: missing capacity record");
  StochasticMap map(std::stoi(rows[0][1]));
  map.free_.clear();
  for (const auto& r : rows) {
    if (r[0] != "block") continue;
    const int id = std::stoi(r[1]);
    if (id >= static_cast<int>(map.slots_.size())) map.slots_.resize(id + 1);
    map.slots_[id] = {parse_role(r[2]), std::stoi(r[3]), std::stoi(r[4]), true};
  }
  map.rebuild_active();
  // Free list: complement of the allocated indices.
  std::vector<bool> used(map.capacity_, false);
  for (int i : map.active_) used[i] = true;
  for (int i = 0; i < map.capacity_;) {
    if (used[i]) { ++i; continue; }
    int j = i;
    while (j < map.capacity_ && !used[j]) ++j;
    map.free_.push_back({i, j - i});
    i = j;
  }
  for (const auto& r : rows) {
    if (r[0] == "mean") {
      map.x_(std::stoi(r[1])) = parse_double(r[2]);
    } else if (r[0] == "cov") {
      const int a = std::stoi(r[1]), b = std::stoi(r[2]);
      map.p_(a, b) = map.p_(b, a) = parse_double(r[3]);
    }
  }
  return map;
}

double mahalanobis(const Eigen::VectorXd& y, const Eigen::MatrixXd& s) {
  if (s.rows() != s.cols() || s.rows() != y.size())
    throw std::invalid_argument("mahalanobis: dimension mismatch");
  if (!s.allFinite() || (s - s.transpose()).cwiseAbs().maxCoeff() > 1e-9 * (1.0 + s.cwiseAbs().maxCoeff()))
    throw NotPositiveDefiniteError("innovation covariance not symmetric");
  Eigen::LLT<Eigen::MatrixXd> llt(s);
  if (llt.info() != Eigen::Success) throw NotPositiveDefiniteError("innovation covariance not positive definite");
  return y.dot(llt.solve(y));
}

}  // namespace ekfslam
