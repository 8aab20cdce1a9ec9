#include "causal/fin_object.hpp"

namespace causal {}
