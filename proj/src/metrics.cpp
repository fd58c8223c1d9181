#include "laradb/metrics.hpp"

#include <sstream>

namespace lara {

Metrics& Metrics::global() {
    static Metrics m;
    return m;
}

void Metrics::reset() {
    rowsIn = 0;
    rowsOut = 0;
    tuplesMaterialized = 0;
    bytesSorted = 0;
    partialProducts = 0;
}

std::string Metrics::report() const {
    std::ostringstream os;
    os << "rows_in " << rowsIn.load() << "\n";
    os << "rows_out " << rowsOut.load() << "\n";
    os << "tuples_materialized " << tuplesMaterialized.load() << "\n";
    os << "bytes_sorted " << bytesSorted.load() << "\n";
    os << "partial_products " << partialProducts.load() << "\n";
    return os.str();
}

} // namespace lara
