// Regenerates data/case_study/: store, replay fixture, dialog and questions.

#include <filesystem>
#include <fstream>
#include <iostream>

#include "case_study.hpp"

int main(int argc, char** argv) {
  namespace fs = std::filesystem;
  const fs::path dir = argc > 1 ? argv[1] : "data/case_study";
  fs::create_directories(dir);
  auto built = evmem::case_study::build();
  evmem::save_snapshot_file(built.memory, dir / "store.json");
  std::ofstream(dir / "replay.jsonl") << built.replay;
  std::ofstream(dir / "dialog.jsonl") << evmem::case_study::dialog_jsonl();
  std::ofstream(dir / "questions.jsonl") << evmem::case_study::questions_jsonl();
  std::ofstream(dir / "config.json") << nlohmann::json(evmem::case_study::config()).dump(2) << "\n";

  const auto& s = built.result.stats;
  std::cout << "events " << built.memory.store.event_count() << ", relations " << built.memory.store.relation_count()
            << ", topics " << built.memory.topics.topics.size() << "\n"
            << "explored " << s.total_steps << ", kept " << s.kept_nodes << ", starts " << s.initial_nodes
            << ", refined " << s.refined << "\n"
            << "answer: " << built.result.answer << "\n";
  return 0;
}
