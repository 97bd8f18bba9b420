from airdrop_sybil.main import main

if __name__ == "__main__":
    main()
