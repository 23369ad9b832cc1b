#include "ensopt/archive.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace ensopt {

std::int64_t Archive::insert(const DesignPoint& point, int realization_id,
                             double value, long generation) {
  EvaluationRecord rec;
  rec.point = point;
  rec.realization_id = realization_id;
  rec.value = value;
  rec.generation = generation;
  return insert(std::move(rec));
}

std::int64_t Archive::insert(EvaluationRecord record) {
  if (!std::isfinite(record.value))
    throw std::invalid_argument("archive: non-finite value");
  record.record_id = next_id_++;
  records_.push_back(std::move(record));
  ++total_simulations_;
  return records_.back().record_id;
}

NeighborSet Archive::select(const DesignPoint& query,
                            const std::vector<double>& dist, double d_max,
                            int n_max) const {
  std::vector<std::size_t> in_range;
  for (std::size_t i = 0; i < records_.size(); ++i)
    if (dist[i] <= d_max) in_range.push_back(i);

  const auto closer = [&](std::size_t a, std::size_t b) {
    if (dist[a] != dist[b]) return dist[a] < dist[b];
    return records_[a].record_id < records_[b].record_id;
  };
  const std::size_t keep = std::min<std::size_t>(n_max, in_range.size());
  std::partial_sort(in_range.begin(), in_range.begin() + keep, in_range.end(),
                    closer);
  in_range.resize(keep);

  NeighborSet out;
  out.reserve(keep);
  for (std::size_t i : in_range) out.push_back({records_[i], dist[i]});
  (void)query;
  return out;
}

NeighborSet Archive::nearest_within(const DesignPoint& query,
                                    const DistanceFn& distance, double d_max,
                                    int n_max) const {
  if (!(d_max > 0)) throw std::invalid_argument("nearest_within: d_max must be > 0");
  if (n_max < 1) throw std::invalid_argument("nearest_within: n_max must be >= 1");

  std::vector<double> dist(records_.size());
  const std::int64_t count = static_cast<std::int64_t>(records_.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < count; ++i)
    dist[i] = distance(records_[i].point, query);
  return select(query, dist, d_max, n_max);
}

NeighborSet Archive::nearest_within_serial(const DesignPoint& query,
                                           const DistanceFn& distance,
                                           double d_max, int n_max) const {
  if (!(d_max > 0)) throw std::invalid_argument("nearest_within: d_max must be > 0");
  if (n_max < 1) throw std::invalid_argument("nearest_within: n_max must be >= 1");

  std::vector<double> dist(records_.size());
  for (std::size_t i = 0; i < records_.size(); ++i)
    dist[i] = distance(records_[i].point, query);
  return select(query, dist, d_max, n_max);
}

void Archive::dump_csv(std::ostream& os) const {
  os << "record_id,generation,realization_id,value";
  const Eigen::Index dim = records_.empty() ? 0 : records_.front().point.size();
  for (Eigen::Index j = 0; j < dim; ++j) os << ",coord_" << j;
  os << '\n';
  os << std::setprecision(17);
  for (const auto& r : records_) {
    os << r.record_id << ',' << r.generation << ',' << r.realization_id << ','
       << r.value;
    for (Eigen::Index j = 0; j < r.point.size(); ++j) os << ',' << r.point[j];
    os << '\n';
  }
}

void Archive::dump_csv(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("archive: cannot open " + path);
  dump_csv(os);
}

Archive Archive::load_csv(std::istream& is) {
  Archive archive;
  std::string line;
  if (!std::getline(is, line))
    throw std::runtime_error("archive: empty CSV");
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string cell;
    std::vector<double> cells;
    while (std::getline(row, cell, ',')) cells.push_back(std::stod(cell));
    if (cells.size() < 4) throw std::runtime_error("archive: short CSV row");
    EvaluationRecord rec;
    rec.generation = static_cast<long>(cells[1]);
    rec.realization_id = static_cast<int>(cells[2]);
    rec.value = cells[3];
    rec.point = Eigen::Map<Vector>(cells.data() + 4,
                                   static_cast<Eigen::Index>(cells.size() - 4));
    archive.insert(std::move(rec));
  }
  return archive;
}

Archive Archive::load_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("archive: cannot open " + path);
  return load_csv(is);
}

}  // namespace ensopt
