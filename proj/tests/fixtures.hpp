#pragma once

#include <string>

// One gold graph and three candidate parses of the same sentence, used across
// the metric tests. Scores for these pairs are pinned against an independent
// reference implementation.
namespace fixtures {

inline const std::string sample_snt =
    "asbestos is in products that we produce now";

inline const std::string sample_gold = R"((a / asbestos
   :time (n / now)
   :polarity -
   :location (t / thing
      :ARG1-of (p / produce-01
         :ARG0 (w / we)))))";

inline const std::string sample_parse_a = R"((a / asbestos
   :time (n / now)
   :polarity -
   :location (p / product
      :poss (w / we))))";

inline const std::string sample_parse_b = R"((a / asbesto
   :polarity -
   :ARG1 (w / we
      :ARG1-of (p / product
         :mod (n / now)))))";

inline const std::string sample_parse_c = R"((a / asbestos
   :polarity -
   :location (p / product)
   :time (n / now)))";

}  // namespace fixtures
