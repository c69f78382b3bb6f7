#ifndef BNCA_BNCA_HPP
#define BNCA_BNCA_HPP

// Umbrella header for the whole library.

#include "bnca/dataset.hpp"
#include "bnca/eigenbasis.hpp"
#include "bnca/eval.hpp"
#include "bnca/experiment.hpp"
#include "bnca/nca.hpp"
#include "bnca/neighbors.hpp"
#include "bnca/posterior.hpp"
#include "bnca/serialize.hpp"
#include "bnca/variational.hpp"

#endif  // BNCA_BNCA_HPP
