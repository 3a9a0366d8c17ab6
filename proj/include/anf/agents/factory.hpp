#pragma once

#include <memory>

#include "anf/agents/sac.hpp"
#include "anf/agents/td3.hpp"

namespace anf::agents {

template <class S>
std::unique_ptr<Agent<S>> make_agent(const AgentConfig& cfg, std::uint64_t seed) {
  if (cfg.algorithm == Algorithm::td3) return std::make_unique<Td3Agent<S>>(cfg, seed);
  return std::make_unique<SacAgent<S>>(cfg, seed);
}

}  // namespace anf::agents
