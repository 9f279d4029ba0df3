#include <iostream>

#include "cli.hpp"
#include "sess/errors.hpp"

int main(int argc, char** argv) {
  using namespace sess::cli;
  CLI::App app{"Multi-scale saliency enhancement for black-box classifiers"};
  app.require_subcommand(1);
  std::function<int()> run;
  add_saliency(app, run);
  add_inspect(app, run);
  add_rerun(app, run);
  add_eval_insdel(app, run);
  add_eval_pointing(app, run);
  add_sweep(app, run);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kInputError;
  }

  try {
    return run();
  } catch (const sess::PatchError& e) {
    std::cerr << "sess: " << current_stage() << ": " << e.cause_category() << ": " << e.what()
              << '\n';
    return exit_code_for(e.cause_category());
  } catch (const sess::Error& e) {
    std::cerr << "sess: " << current_stage() << ": " << e.category() << ": " << e.what() << '\n';
    return exit_code_for(e.category());
  } catch (const std::exception& e) {
    std::cerr << "sess: " << current_stage() << ": " << e.what() << '\n';
    return kInternalError;
  }
}
