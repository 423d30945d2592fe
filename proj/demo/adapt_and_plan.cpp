// Generates a short ramp session, learns weights from the demonstrations and
// plans the last frame with them.

#include <iostream>

#include "offroad/commands.hpp"

int main() {
  using namespace offroad;
  RunConfig cfg;
  cfg.kind = ScenarioKind::ramp;
  cfg.scenario.point_count = 40000;
  const PrimitiveLibrary lib = generate_primitives(cfg.primitives);
  const auto frames = gen_frames(cfg.scenario_spec(), 8, cfg.oracle_spec(), lib, cfg.frame_gen());

  const AdaptResult learned = adapt_bundle(frames, lib, cfg);
  std::cout << "learned weights " << detail::weights_text(learned.weights) << "\n";

  const auto& last = frames.back();
  const PlannedTrajectory p = plan(last.stack, last.state, last.reference, learned.weights, lib, cfg.plan_config());
  std::cout << (p.success ? "reached guide point" : "stopped early") << " with " << p.segments.size()
            << " segments\n";
  for (const auto& s : p.states.states)
    std::cout << format_double(s.t) << ' ' << format_double(s.pose.x) << ' ' << format_double(s.pose.y) << '\n';
}
