#ifndef METAGCD_METAGCD_HPP
#define METAGCD_METAGCD_HPP

#include "metagcd/autodiff.hpp"
#include "metagcd/checkpoint.hpp"
#include "metagcd/cli.hpp"
#include "metagcd/cluster_eval.hpp"
#include "metagcd/config.hpp"
#include "metagcd/data.hpp"
#include "metagcd/errors.hpp"
#include "metagcd/evaluation.hpp"
#include "metagcd/losses.hpp"
#include "metagcd/model.hpp"
#include "metagcd/protocol.hpp"
#include "metagcd/report.hpp"
#include "metagcd/rng.hpp"
#include "metagcd/tensor.hpp"
#include "metagcd/trainer.hpp"

#endif  // METAGCD_METAGCD_HPP
