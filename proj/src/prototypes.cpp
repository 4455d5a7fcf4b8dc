#include "fedproc/prototypes.hpp"

#include "fedproc/errors.hpp"

namespace fedproc {

bool PrototypeSet::complete() const {
    for (bool p : present) {
        if (!p) return false;
    }
    return !present.empty();
}

Tensor PrototypeSet::to_matrix() const {
    for (std::size_t k = 0; k < present.size(); ++k) {
        if (!present[k]) {
            throw protocol_error("prototype set is missing class " + std::to_string(k));
        }
    }
    if (present.empty()) {
        throw protocol_error("empty prototype set");
    }
    Tensor m({num_classes(), dim});
    for (std::size_t k = 0; k < num_classes(); ++k) {
        for (std::size_t d = 0; d < dim; ++d) {
            m.at(k, d) = vectors[k][d];
        }
    }
    return m;
}

} // namespace fedproc
