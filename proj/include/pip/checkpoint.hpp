#pragma once

#include <string>

#include "pip/model.hpp"

namespace pip {

struct CheckpointError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Container: magic "PIPCKPT1", newline, key-value text header terminated by
// a line "---", then raw little-endian float64 parameter blocks in declared
// order (embedding, positions, per layer wq wk wv wo w1 w2 ln1s ln1b ln2s
// ln2b, final ln scale/bias, head).
class CheckpointCodec {
   public:
    static void save(const TransformerModel& model, const std::string& path);
    static TransformerModel load(const std::string& path);
};

}  // namespace pip
