#include "semitrans/dataset.hpp"

namespace semitrans {

Dataset take_rows(const Dataset& data, const std::vector<Eigen::Index>& index) {
    Dataset out;
    const auto n = static_cast<Eigen::Index>(index.size());
    out.y.resize(n);
    out.x.resize(n, data.x.cols());
    out.names = data.names;
    for (Eigen::Index i = 0; i < n; ++i) {
        out.y[i] = data.y[index[i]];
        out.x.row(i) = data.x.row(index[i]);
    }
    return out;
}

} // namespace semitrans
